//! Built-in end-to-end scenarios. Each scenario builds its geometric assets
//! and runs a fixed, deterministically ordered check suite; the CLI layer
//! adds timing and serialization.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::Result;
use crate::folding::ProfileShape;
use crate::report::{CheckResult, ScenarioOutcome};

pub mod cotangent;
pub mod flow;
pub mod folded;
pub mod torus;

pub use flow::flow_field;

/// Scenario identifiers of the built-in suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioId {
    TrivialTorus,
    FoldedSpheres,
    CotangentT3,
    FoldedT3,
    Custom,
}

impl ScenarioId {
    pub fn parse(s: &str) -> Option<ScenarioId> {
        Some(match s {
            "trivial_torus" => ScenarioId::TrivialTorus,
            "folded_spheres" => ScenarioId::FoldedSpheres,
            "cotangent_t3" => ScenarioId::CotangentT3,
            "folded_t3" => ScenarioId::FoldedT3,
            "custom" => ScenarioId::Custom,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioId::TrivialTorus => "trivial_torus",
            ScenarioId::FoldedSpheres => "folded_spheres",
            ScenarioId::CotangentT3 => "cotangent_t3",
            ScenarioId::FoldedT3 => "folded_t3",
            ScenarioId::Custom => "custom",
        }
    }

    pub fn all() -> [ScenarioId; 5] {
        [
            ScenarioId::TrivialTorus,
            ScenarioId::FoldedSpheres,
            ScenarioId::CotangentT3,
            ScenarioId::FoldedT3,
            ScenarioId::Custom,
        ]
    }
}

/// Tunable parameters shared by the scenarios; every field has a
/// deterministic default.
#[derive(Clone, Debug)]
pub struct ScenarioParams {
    /// Fiber half-dimension where applicable.
    pub n: usize,
    /// Contact constant of the standard product form.
    pub k_standard: f64,
    pub epsilon: f64,
    pub shape: ProfileShape,
    /// Per-axis override for uniform product grids (scenario defaults when
    /// absent).
    pub grid_override: Option<usize>,
    /// Quasi-random audit points.
    pub audit_points: usize,
    /// Sample count for middle-piece identity and Reeb cross-checks.
    pub middle_points: usize,
    /// Profile-certification sweep resolution.
    pub sweep_points: usize,
    pub t_max: f64,
    pub closure_tol: f64,
    pub integrator_tol: f64,
    /// Periodic-orbit sweep size.
    pub orbit_count: usize,
    /// Half-extent of the line coordinate replacing the circle one.
    pub z_max: f64,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            n: 1,
            k_standard: 1.0,
            epsilon: 0.2,
            shape: ProfileShape::default(),
            grid_override: None,
            audit_points: 2000,
            middle_points: 10_000,
            sweep_points: 100_000,
            t_max: 500.0,
            closure_tol: 1e-6,
            integrator_tol: 1e-10,
            orbit_count: 200,
            z_max: 3.0,
            seed: 0x5eed_f01d,
        }
    }
}

/// Run one scenario, streaming each finished check into `sink` (the CLI
/// layer uses this for per-check timing). Construction failures surface as a
/// single failed check rather than an error.
pub fn run_scenario_with(
    id: ScenarioId,
    params: &ScenarioParams,
    sink: &mut dyn FnMut(CheckResult),
) {
    let result: Result<()> = match id {
        ScenarioId::TrivialTorus => torus::checks(params, sink),
        ScenarioId::FoldedSpheres => folded::spheres_checks(params, sink),
        ScenarioId::CotangentT3 => cotangent::checks(params, sink),
        ScenarioId::FoldedT3 => folded::t3_checks(params, sink),
        ScenarioId::Custom => folded::spheres_checks(params, sink),
    };
    if let Err(e) = result {
        // a rejected gluing profile is a failed certification check, not an
        // internal numeric failure
        if let crate::error::Error::ProfileCondition { condition, witness } = &e {
            sink(CheckResult {
                name: alloc::format!("profile_conditions ({condition})"),
                anchor: anchors::PROFILE.to_string(),
                metric: 1.0,
                threshold: 0.5,
                samples: 1,
                passed: false,
                witness: witness.is_finite().then(|| alloc::vec![*witness]),
            });
            return;
        }
        sink(CheckResult {
            name: alloc::format!("scenario_construction ({e})"),
            anchor: "scenario asset construction".to_string(),
            metric: 1e300,
            threshold: 0.0,
            samples: 0,
            passed: false,
            witness: None,
        });
    }
}

/// Run one scenario, collecting the checks.
pub fn run_scenario(id: ScenarioId, params: &ScenarioParams) -> ScenarioOutcome {
    let mut checks = Vec::new();
    run_scenario_with(id, params, &mut |c| checks.push(c));
    ScenarioOutcome {
        scenario: id.name().to_string(),
        checks,
    }
}

pub(crate) fn scan_check(
    name: &str,
    anchor: &str,
    scan: &crate::contact::ResidualScan,
    positivity: bool,
    threshold: f64,
) -> CheckResult {
    if positivity {
        CheckResult {
            name: name.into(),
            anchor: anchor.into(),
            metric: scan.min,
            threshold: 1e-8 * scan.max.max(0.0),
            samples: scan.samples as u64,
            passed: scan.passes_positivity_margin(),
            witness: if scan.passes_positivity_margin() {
                None
            } else {
                Some(scan.min_at.clone())
            },
        }
    } else {
        CheckResult::residual_below(
            name,
            anchor,
            scan.max,
            threshold,
            scan.samples as u64,
            Some(scan.max_at.clone()),
        )
    }
}

/// Anchor strings shared across scenarios (plain formula text).
pub(crate) mod anchors {
    pub const CONTACT: &str = "sigma ^ (d sigma)^n is a positive volume form";
    pub const BUNDLE: &str = "sigma = lambda_beta + K pi*(d theta), K large enough";
    pub const RESTRICT: &str = "iota_theta*(sigma) = lambda_theta on each fiber";
    pub const COLLAR: &str = "sigma = beta + K d theta on the boundary collar";
    pub const PARTITION: &str = "f_1 + f_2 = 1, a partition of unity on the circle";
    pub const EXACT: &str = "phi*(d beta) = d beta and phi* beta - beta closed";
    pub const PERIODS: &str = "generator period integrals of phi* beta - beta vanish";
    pub const VERTICAL: &str = "d lambda_beta nondegenerate on every Vert_x";
    pub const HORIZONTAL: &str = "Hor_x is the d lambda_beta-orthogonal complement of Vert_x";
    pub const MIDDLE_IDENTITY: &str =
        "sigma ^ (d sigma)^n = n f^{n-1} (f'g - fg') dt ^ alpha ^ (d alpha)^{n-1} ^ d theta";
    pub const FOLD_LOCUS: &str =
        "[d(f alpha + g d theta)|_TA]^n = n f' f^{n-1} dt ^ alpha ^ (d alpha)^{n-1}";
    pub const PROFILE: &str =
        "f even with f = K e^{t+1} at the collar; g odd with g = K; f'g - fg' > 0; f' = 0 iff t = 0";
    pub const SEAM: &str = "conditions (1)-(2) glue the middle piece smoothly to the collars";
    pub const FOLDED_REEB: &str =
        "R = (-g'/(f'g - fg')) R_alpha + (f'/(f'g - fg')) d_theta on the middle piece";
    pub const REEB_AT_FOLD: &str = "f(0) = K e and g(0) = 0";
    pub const CONTACT_FIELD: &str = "Z = (fg/(f'g - fg')) d_t + z d_z with H_Z = sigma(Z)";
    pub const CUTOFF: &str = "H_Z' = mu H_Z with mu(t, x, z) = h(t)";
    pub const REEB_EQS: &str = "alpha(R) = 1 and iota_R d alpha = 0";
    pub const HAMILTONIAN: &str =
        "alpha(Z_H) = H and iota_{Z_H} d alpha = dH(R) alpha - dH";
    pub const TABLE: &str =
        "Z_1 = d_{y_1}, ..., Z_{2n+1} = d_z with H_1 = x_1, ..., H_{2n+1} = 1";
    pub const LIOUVILLE: &str = "iota_X d beta = beta";
    pub const DBETA_VOLUME: &str = "(d beta)^3 is a volume form";
    pub const OUTWARD: &str = "X points transversely out of the boundary";
    pub const WINDING: &str =
        "periodic Reeb orbits travel along torus directions, hence are homotopically nontrivial";
    pub const NO_CONTRACTIBLE: &str = "the induced contact form admits no contractible Reeb orbit";
    pub const RESCALE: &str = "Reeb orbits of (K e) alpha are those of alpha, reparametrized by 1/(K e)";
    pub const ORDER: &str = "embedded fifth-order integrator convergence";
}

/// Shared helper: the scenario id list as strings (CLI `list` subcommand).
pub fn scenario_names() -> Vec<String> {
    ScenarioId::all().iter().map(|s| s.name().to_string()).collect()
}
