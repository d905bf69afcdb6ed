//! The cotangent scenario: the 3-torus times a 3-disk with the mixed-sign
//! Liouville form, its convex boundary, the boundary Reeb field, and the
//! periodic-orbit winding sweep.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use super::{anchors, ScenarioParams};
use crate::chart::{Chart, ChartRef};
use crate::contact::{ConstraintHypersurface, ContactFormRecord, GridSpec, Reference};
use crate::dynamics::{detect_periodic, integrate, winding_vector, ContractibilityEvidence};
use crate::error::Result;
use crate::expr::ScalarExpr;
use crate::fibration::{
    circle_partition, monodromy_from_hamiltonians, monodromy_period_integral,
    verify_exact_symplectomorphism, CollarModel, CollarSpec, MappingTorusSpec, MonodromyMap,
};
use crate::form::{DifferentialForm, VectorField};
use crate::ode::{Integrator, Rhs};
use crate::real::{self, TWO_PI};
use crate::report::CheckResult;
use crate::rng::Rng;

pub struct CotangentAssets {
    pub fiber: ChartRef,
    pub beta: DifferentialForm,
    pub liouville: VectorField,
    pub level: ScalarExpr,
    pub boundary: ConstraintHypersurface,
    /// The induced boundary form as a constrained contact record (n = 2).
    pub alpha_record: Arc<ContactFormRecord>,
    pub boundary_reeb: VectorField,
}

/// Chart, Liouville form `x1 dth1 - x2 dth2 + x3 dth3`, radial Liouville
/// field, boundary sphere bundle, and the boundary Reeb field.
pub fn build_assets() -> Result<CotangentAssets> {
    let fiber = Chart::new(
        "t3xd3",
        vec![
            Chart::angle("th1"),
            Chart::angle("th2"),
            Chart::angle("th3"),
            Chart::line("x1", -1.0, 1.0),
            Chart::line("x2", -1.0, 1.0),
            Chart::line("x3", -1.0, 1.0),
        ],
        None,
    )?;
    let beta = DifferentialForm::from_terms(
        &fiber,
        1,
        vec![
            (ScalarExpr::var("x1"), vec![0]),
            (-ScalarExpr::var("x2"), vec![1]),
            (ScalarExpr::var("x3"), vec![2]),
        ],
    )?;
    let liouville = VectorField::new(
        &fiber,
        vec![
            ScalarExpr::zero(),
            ScalarExpr::zero(),
            ScalarExpr::zero(),
            ScalarExpr::var("x1"),
            ScalarExpr::var("x2"),
            ScalarExpr::var("x3"),
        ],
    )?;
    let level = ScalarExpr::var("x1").powi(2) + ScalarExpr::var("x2").powi(2)
        + ScalarExpr::var("x3").powi(2)
        - ScalarExpr::one();
    let boundary = ConstraintHypersurface::new(&fiber, level.clone(), 1e-6)?;
    // boundary orientation: the symplectic orientation of (d beta)^3
    // contracted with the outward Liouville field
    let dbeta = beta.d();
    let orientation = {
        let ratio = dbeta.wedge_power(3)?.volume_ratio()?;
        if ratio.as_constant().unwrap_or(1.0) >= 0.0 {
            1.0
        } else {
            -1.0
        }
    };
    let reference = DifferentialForm::volume(&fiber)
        .interior(&liouville)?
        .scale(&ScalarExpr::constant(orientation));
    let alpha_record = ContactFormRecord::new_symbolic(
        &fiber,
        beta.clone(),
        2,
        Reference::Form(reference),
        Some(ConstraintHypersurface::new(&fiber, level.clone(), 1e-6)?),
    )?;
    let boundary_reeb = VectorField::new(
        &fiber,
        vec![
            ScalarExpr::var("x1"),
            -ScalarExpr::var("x2"),
            ScalarExpr::var("x3"),
            ScalarExpr::zero(),
            ScalarExpr::zero(),
            ScalarExpr::zero(),
        ],
    )?;
    Ok(CotangentAssets {
        fiber,
        beta,
        liouville,
        level,
        boundary,
        alpha_record,
        boundary_reeb,
    })
}

/// Mapping torus over the cotangent fiber; identity monodromy by default.
pub fn build_torus_spec(
    assets: &CotangentAssets,
    monodromy: MonodromyMap,
    epsilon: f64,
) -> Result<Arc<MappingTorusSpec>> {
    MappingTorusSpec::new(
        &assets.fiber,
        assets.beta.clone(),
        monodromy,
        circle_partition(core::f64::consts::PI / 2.0)?,
        CollarModel {
            radial_coords: vec![3, 4, 5],
            weight: 1.0,
        },
        epsilon,
    )
}

/// Interior Hamiltonian mixing the angle and radial directions, vanishing
/// identically near the boundary sphere.
pub fn torus_hamiltonian() -> ScalarExpr {
    let r2 = ScalarExpr::var("x1").powi(2)
        + ScalarExpr::var("x2").powi(2)
        + ScalarExpr::var("x3").powi(2);
    ScalarExpr::constant(0.2)
        * (ScalarExpr::one() - ScalarExpr::bump(&r2, 0.1, 0.8))
        * ScalarExpr::var("th1").cos()
}

/// Snap a random direction to a small-integer rational direction on the
/// sphere; the resulting Reeb orbit closes within one torus period.
fn rational_direction(rng: &mut Rng) -> Vec<f64> {
    loop {
        let q: Vec<i64> = (0..3).map(|_| rng.range_i64(-5, 6)).collect();
        if q.iter().all(|&c| c == 0) {
            continue;
        }
        let norm = real::sqrt(q.iter().map(|&c| (c * c) as f64).sum());
        return q.iter().map(|&c| c as f64 / norm).collect();
    }
}

pub fn checks(
    params: &ScenarioParams,
    sink: &mut dyn FnMut(CheckResult),
) -> Result<()> {
    let assets = build_assets()?;

    // --- Liouville identity: i_X d(beta) = beta, structurally -------------
    let contraction = assets.beta.d().interior(&assets.liouville)?;
    sink(CheckResult::flag(
        "liouville_identity",
        anchors::LIOUVILLE,
        contraction.sub(&assets.beta)?.is_zero(),
        None,
    ));

    // --- (d beta)^3 is a volume form ---------------------------------------
    let top = assets.beta.d().wedge_power(3)?;
    let ratio = top.volume_ratio()?;
    let ratio_const = ratio.as_constant();
    sink(CheckResult::flag(
        "dbeta_cubed_constant",
        anchors::DBETA_VOLUME,
        ratio_const.map(real::abs) == Some(6.0),
        None,
    ));
    let mut min_abs = f64::INFINITY;
    let pts = assets.fiber.halton_points(512, 3);
    for p in &pts {
        min_abs = min_abs.min(real::abs(assets.fiber.eval(&ratio, p)?));
    }
    sink(CheckResult::margin_above(
        "dbeta_cubed_nonvanishing",
        anchors::DBETA_VOLUME,
        min_abs,
        0.0,
        pts.len() as u64,
        None,
    ));

    // --- outwardness: d(level)(X) = 2 on the boundary ----------------------
    let dlevel_terms: Vec<(ScalarExpr, Vec<usize>)> = (0..6)
        .map(|i| {
            (
                assets.level.partial(assets.fiber.coord_name(i)),
                vec![i],
            )
        })
        .filter(|(c, _)| !c.is_zero())
        .collect();
    let dlevel = DifferentialForm::from_terms(&assets.fiber, 1, dlevel_terms)?;
    let outward = dlevel.pair(&assets.liouville)?;
    let mut worst = 0.0f64;
    let samples = assets.boundary.sample_points(200, 9)?;
    for p in &samples {
        worst = worst.max(real::abs(assets.fiber.eval(&outward, p)? - 2.0));
    }
    sink(CheckResult::residual_below(
        "liouville_outward_at_boundary",
        anchors::OUTWARD,
        worst,
        1e-9,
        samples.len() as u64,
        None,
    ));

    // --- boundary contact form and its Reeb field --------------------------
    let scan = assets.alpha_record.contact_residual(&GridSpec::Halton {
        count: 600,
        offset: 0,
    })?;
    sink(super::scan_check(
        "boundary_contact",
        anchors::CONTACT,
        &scan,
        true,
        0.0,
    ));
    let alpha_r = assets.beta.pair(&assets.boundary_reeb)?;
    let contraction = assets.beta.d().interior(&assets.boundary_reeb)?;
    let frame_samples = assets
        .alpha_record
        .sample_points(&GridSpec::Halton {
            count: 10_000,
            offset: 17,
        })?;
    let mut worst = 0.0f64;
    let mut worst_at = vec![];
    for p in &frame_samples {
        let a = assets.fiber.eval(&alpha_r, p)?;
        if real::abs(a - 1.0) > worst {
            worst = real::abs(a - 1.0);
            worst_at = p.clone();
        }
        let cov = contraction.covector_at(p)?;
        let frame = assets.alpha_record.frame_at(p)?;
        for v in &frame {
            let r = real::abs(crate::linalg::dot(&cov, v));
            if r > worst {
                worst = r;
                worst_at = p.clone();
            }
        }
    }
    sink(CheckResult::residual_below(
        "boundary_reeb_identities",
        anchors::REEB_EQS,
        worst,
        1e-10,
        frame_samples.len() as u64,
        Some(worst_at),
    ));

    // --- Lemma round trip, numerically, on the boundary ---------------------
    let mut rng = Rng::new(params.seed ^ 0xa5a5);
    let mut worst = 0.0f64;
    let round_trip_samples = 1000usize;
    for _ in 0..round_trip_samples {
        // random smooth Hamiltonian from a small expression family
        let h = random_hamiltonian(&mut rng);
        let p = assets
            .boundary
            .project(&assets.fiber.random_point(&mut rng))?;
        let z = assets.alpha_record.hamiltonian_field_at(&h, &p)?;
        let cov = assets.beta.covector_at(&p)?;
        let recovered: f64 = cov.iter().zip(&z).map(|(a, b)| a * b).sum();
        let expect = assets.fiber.eval(&h, &p)?;
        worst = worst.max(real::abs(recovered - expect));
    }
    sink(CheckResult::residual_below(
        "hamiltonian_round_trip",
        anchors::HAMILTONIAN,
        worst,
        1e-10,
        round_trip_samples as u64,
        None,
    ));

    // --- periodic-orbit winding sweep ---------------------------------------
    let mut rng = Rng::new(params.seed);
    let mut failures = 0usize;
    let mut checked = 0usize;
    for _ in 0..params.orbit_count {
        let dir = rational_direction(&mut rng);
        let x0 = vec![
            rng.range(0.0, TWO_PI),
            rng.range(0.0, TWO_PI),
            rng.range(0.0, TWO_PI),
            dir[0],
            dir[1],
            dir[2],
        ];
        let rec = detect_periodic(
            &assets.boundary_reeb,
            &x0,
            60.0,
            params.closure_tol,
            params.integrator_tol,
        )?;
        checked += 1;
        match rec.period {
            None => failures += 1,
            Some(_) => {
                let (w, e) = winding_vector(&rec)?;
                if e != ContractibilityEvidence::NonContractible || w.iter().all(|&c| c == 0) {
                    failures += 1;
                }
            }
        }
    }
    sink(CheckResult::residual_below(
        "rational_orbits_nonzero_winding",
        anchors::WINDING,
        failures as f64,
        0.0,
        checked as u64,
        None,
    ));

    // --- the two displayed axis orbits, as pinned records --------------------
    for (name, x0, winding) in [
        ("orbit_axis_x1", [0.0, 0.0, 0.0, 1.0, 0.0, 0.0], [1i64, 0, 0]),
        ("orbit_axis_x2", [0.1, 0.2, 0.3, 0.0, 1.0, 0.0], [0i64, -1, 0]),
    ] {
        let rec = detect_periodic(
            &assets.boundary_reeb,
            &x0,
            20.0,
            params.closure_tol,
            params.integrator_tol,
        )?;
        let period_err = rec
            .period
            .map(|t| real::abs(t - TWO_PI))
            .unwrap_or(f64::INFINITY);
        let winding_ok = rec.winding.as_deref() == Some(&winding);
        sink(CheckResult::residual_below(
            name,
            anchors::WINDING,
            if winding_ok { period_err } else { f64::INFINITY },
            1e-6,
            1,
            Some(x0.to_vec()),
        ));
    }

    // --- irrational direction never closes ----------------------------------
    let norm = real::sqrt(3.0);
    let x0 = vec![
        0.0,
        0.0,
        0.0,
        1.0 / norm,
        real::sqrt(2.0) / norm,
        0.0,
    ];
    let rec = detect_periodic(
        &assets.boundary_reeb,
        &x0,
        params.t_max,
        params.closure_tol,
        1e-9,
    )?;
    sink(CheckResult::flag(
        "irrational_direction_no_closure",
        anchors::NO_CONTRACTIBLE,
        rec.period.is_none(),
        None,
    ));

    // --- transverse coordinates stay constant -------------------------------
    let x0 = [0.0, 0.0, 0.0, 1.0, 0.0, 0.0];
    let traj = integrate(&assets.boundary_reeb, &x0, 100.0, 1e-8)?;
    let mut worst = 0.0f64;
    for s in &traj.samples {
        for (l, x) in s.lift[3..6].iter().zip(&x0[3..6]) {
            worst = worst.max(real::abs(l - x));
        }
    }
    sink(CheckResult::residual_below(
        "radial_coordinates_conserved",
        anchors::WINDING,
        worst,
        1e-8,
        traj.samples.len() as u64,
        None,
    ));

    // --- exactness evidence for a Hamiltonian monodromy ----------------------
    let collar = CollarSpec {
        radial_coords: vec![3, 4, 5],
        inner_radius: 0.9,
    };
    let monodromy = monodromy_from_hamiltonians(
        &assets.fiber,
        &assets.beta,
        vec![torus_hamiltonian()],
        collar,
        params.integrator_tol,
    )?;
    let report = verify_exact_symplectomorphism(&monodromy, &assets.beta, 12)?;
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
    // period integrals along the three torus generators at an interior point
    let mut worst = 0.0f64;
    for gen in 0..3usize {
        let gamma = move |s: f64| -> (Vec<f64>, Vec<f64>) {
            let mut p = vec![0.7, 1.1, 2.3, 0.25, 0.15, 0.35];
            p[gen] = s;
            let mut v = vec![0.0; 6];
            v[gen] = 1.0;
            (p, v)
        };
        let integral = monodromy_period_integral(&monodromy, &assets.beta, &gamma, 128)?;
        worst = worst.max(real::abs(integral));
    }
    sink(CheckResult::residual_below(
        "monodromy_generator_periods",
        anchors::PERIODS,
        worst,
        1e-6,
        3,
        None,
    ));

    // --- integrator order measurement ----------------------------------------
    let slope = integrator_order_slope()?;
    sink(CheckResult::margin_above(
        "integrator_order",
        anchors::ORDER,
        slope,
        4.0,
        4,
        None,
    ));

    // --- Reeb reparametrization scale -----------------------------------------
    let circle = Chart::new("s1", vec![Chart::angle("phi")], None)?;
    let ke = params.k_standard * real::exp(1.0);
    let reeb_scaled = VectorField::new(&circle, vec![ScalarExpr::constant(1.0 / ke)])?;
    let rec = detect_periodic(&reeb_scaled, &[0.2], 40.0, params.closure_tol, 1e-12)?;
    let t = rec.period.unwrap_or(f64::NAN);
    sink(CheckResult::residual_below(
        "reeb_rescaling_period_scale",
        anchors::RESCALE,
        real::abs(t - ke * TWO_PI) / (ke * TWO_PI),
        1e-6,
        1,
        None,
    ));

    Ok(())
}

fn random_hamiltonian(rng: &mut Rng) -> ScalarExpr {
    let vars = ["th1", "th2", "th3", "x1", "x2", "x3"];
    let pick = |rng: &mut Rng| ScalarExpr::var(vars[(rng.next_u64() % 6) as usize]);
    let a = ScalarExpr::constant(rng.range(-1.0, 1.0));
    let b = ScalarExpr::constant(rng.range(-1.0, 1.0));
    let base = a * pick(rng) + b * pick(rng).sin();
    match rng.next_u64() % 3 {
        0 => base,
        1 => base.cos(),
        _ => base.powi(2),
    }
}

/// Fixed-step convergence slope on the plane rotation field; the embedded
/// scheme is fifth order, so the log-log slope must clear 4.
fn integrator_order_slope() -> Result<f64> {
    struct Circle;
    impl Rhs for Circle {
        fn dim(&self) -> usize {
            2
        }
        fn eval(&self, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = -y[1];
            dy[1] = y[0];
            Ok(())
        }
    }
    let integ = Integrator::new(&Circle, 1e-10);
    let mut logs = Vec::new();
    for &steps in &[60usize, 120, 240, 480] {
        let y = integ.solve_fixed(&[1.0, 0.0], TWO_PI, steps)?;
        let e = real::sqrt((y[0] - 1.0) * (y[0] - 1.0) + y[1] * y[1]);
        logs.push((libm::log(TWO_PI / steps as f64), libm::log(e)));
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = logs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let num: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    Ok(num / den)
}
