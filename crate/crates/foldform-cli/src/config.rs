//! Scenario configuration: strict JSON (unknown fields rejected), resolved
//! against per-scenario defaults before any computation runs. The resolved
//! form is echoed verbatim into the report so runs are reproducible from the
//! report alone.

use anyhow::{bail, Context};
use foldform_core::folding::ProfileShape;
use foldform_core::scenario::{ScenarioId, ScenarioParams};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blend_lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blend_hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cap_coeff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ramp_half_width: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_axis: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub audit_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub middle_points: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_points: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub closure: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub integrator: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orbit_count: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub csv_dir: Option<PathBuf>,
}

/// User-facing configuration file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dynamics: Option<DynamicsConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputConfig>,
}

impl ScenarioConfig {
    pub fn bare(scenario: &str) -> Self {
        ScenarioConfig {
            scenario: scenario.to_string(),
            n: None,
            k: None,
            epsilon: None,
            profile: None,
            grid: None,
            tolerances: None,
            dynamics: None,
            z_max: None,
            seed: None,
            output: None,
        }
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ScenarioConfig = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }
}

/// Fully resolved configuration: every field concrete. This is what the
/// report echoes.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConfig {
    pub scenario: String,
    pub n: usize,
    pub k: f64,
    pub epsilon: f64,
    pub profile: ResolvedProfile,
    pub grid: ResolvedGrid,
    pub tolerances: ResolvedTolerances,
    pub dynamics: ResolvedDynamics,
    pub z_max: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedProfile {
    pub blend_lo: f64,
    pub blend_hi: f64,
    pub cap_coeff: f64,
    pub ramp_half_width: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedGrid {
    /// Explicit per-axis product-grid override; scenario defaults when null.
    pub per_axis: Option<usize>,
    pub audit_points: usize,
    pub middle_points: usize,
    pub sweep_points: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedTolerances {
    pub closure: f64,
    pub integrator: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResolvedDynamics {
    pub t_max: f64,
    pub orbit_count: usize,
}

/// Per-scenario default half-dimension.
fn default_n(id: ScenarioId) -> usize {
    match id {
        ScenarioId::TrivialTorus => 1,
        ScenarioId::FoldedSpheres | ScenarioId::Custom => 2,
        ScenarioId::CotangentT3 | ScenarioId::FoldedT3 => 3,
    }
}

pub fn resolve(cfg: &ScenarioConfig) -> anyhow::Result<(ScenarioId, ScenarioParams, ResolvedConfig)> {
    let id = ScenarioId::parse(&cfg.scenario)
        .with_context(|| format!("unknown scenario `{}`", cfg.scenario))?;
    let n = cfg.n.unwrap_or_else(|| default_n(id));
    match id {
        ScenarioId::TrivialTorus if !(1..=2).contains(&n) => {
            bail!("trivial_torus supports n in {{1, 2}}, got {n}")
        }
        ScenarioId::FoldedSpheres | ScenarioId::Custom if !(1..=3).contains(&n) => {
            bail!("folded_spheres supports n in {{1, 2, 3}}, got {n}")
        }
        ScenarioId::CotangentT3 | ScenarioId::FoldedT3 if n != 3 => {
            bail!("{} fixes the fiber data, so n must be 3", cfg.scenario)
        }
        _ => {}
    }
    let defaults = ScenarioParams::default();
    let shape_defaults = ProfileShape::default();
    let p = cfg.profile.clone().unwrap_or_default();
    let g = cfg.grid.clone().unwrap_or_default();
    let t = cfg.tolerances.clone().unwrap_or_default();
    let d = cfg.dynamics.clone().unwrap_or_default();
    let resolved = ResolvedConfig {
        scenario: cfg.scenario.clone(),
        n,
        k: cfg.k.unwrap_or(defaults.k_standard),
        epsilon: cfg.epsilon.unwrap_or(defaults.epsilon),
        profile: ResolvedProfile {
            blend_lo: p.blend_lo.unwrap_or(shape_defaults.blend_lo),
            blend_hi: p.blend_hi.unwrap_or(shape_defaults.blend_hi),
            cap_coeff: p.cap_coeff.unwrap_or(shape_defaults.cap_coeff),
            ramp_half_width: p.ramp_half_width.unwrap_or(shape_defaults.ramp_half_width),
        },
        grid: ResolvedGrid {
            per_axis: g.per_axis,
            audit_points: g.audit_points.unwrap_or(defaults.audit_points),
            middle_points: g.middle_points.unwrap_or(defaults.middle_points),
            sweep_points: g.sweep_points.unwrap_or(defaults.sweep_points),
        },
        tolerances: ResolvedTolerances {
            closure: t.closure.unwrap_or(defaults.closure_tol),
            integrator: t.integrator.unwrap_or(defaults.integrator_tol),
        },
        dynamics: ResolvedDynamics {
            t_max: d.t_max.unwrap_or(defaults.t_max),
            orbit_count: d.orbit_count.unwrap_or(defaults.orbit_count),
        },
        z_max: cfg.z_max.unwrap_or(defaults.z_max),
        seed: cfg.seed.unwrap_or(defaults.seed),
    };
    for (name, v) in [
        ("k", resolved.k),
        ("epsilon", resolved.epsilon),
        ("tolerances.closure", resolved.tolerances.closure),
        ("tolerances.integrator", resolved.tolerances.integrator),
        ("dynamics.t_max", resolved.dynamics.t_max),
        ("z_max", resolved.z_max),
    ] {
        if !v.is_finite() || v <= 0.0 {
            bail!("{name} must be positive and finite, got {v}");
        }
    }
    if resolved.epsilon >= 1.0 {
        bail!("epsilon must lie in (0, 1), got {}", resolved.epsilon);
    }
    let pr = &resolved.profile;
    if !(0.0 < pr.blend_hi && pr.blend_hi < pr.blend_lo && pr.blend_lo < 1.0) {
        bail!(
            "profile blend band must satisfy 0 < blend_hi < blend_lo < 1, got hi = {}, lo = {}",
            pr.blend_hi,
            pr.blend_lo
        );
    }
    if !(pr.cap_coeff > 0.0 && pr.cap_coeff.is_finite()) {
        bail!("profile cap_coeff must be positive, got {}", pr.cap_coeff);
    }
    if !(0.0 < pr.ramp_half_width && pr.ramp_half_width < 1.0) {
        bail!(
            "profile ramp_half_width must lie in (0, 1), got {}",
            pr.ramp_half_width
        );
    }
    let params = ScenarioParams {
        n: resolved.n,
        k_standard: resolved.k,
        epsilon: resolved.epsilon,
        shape: ProfileShape {
            blend_lo: resolved.profile.blend_lo,
            blend_hi: resolved.profile.blend_hi,
            cap_coeff: resolved.profile.cap_coeff,
            ramp_half_width: resolved.profile.ramp_half_width,
        },
        grid_override: resolved.grid.per_axis,
        audit_points: resolved.grid.audit_points,
        middle_points: resolved.grid.middle_points,
        sweep_points: resolved.grid.sweep_points,
        t_max: resolved.dynamics.t_max,
        closure_tol: resolved.tolerances.closure,
        integrator_tol: resolved.tolerances.integrator,
        orbit_count: resolved.dynamics.orbit_count,
        z_max: resolved.z_max,
        seed: resolved.seed,
    };
    Ok((id, params, resolved))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_rejected() {
        let text = r#"{"scenario": "trivial_torus", "tolerrance": 1.0}"#;
        assert!(serde_json::from_str::<ScenarioConfig>(text).is_err());
    }

    #[test]
    fn defaults_fill_in() {
        let cfg = ScenarioConfig::bare("folded_spheres");
        let (id, params, resolved) = resolve(&cfg).unwrap();
        assert_eq!(id, ScenarioId::FoldedSpheres);
        assert_eq!(params.n, 2);
        assert_eq!(params.grid_override, None);
        assert_eq!(resolved.grid.sweep_points, 100_000);
    }

    #[test]
    fn folded_t3_rejects_other_n() {
        let mut cfg = ScenarioConfig::bare("folded_t3");
        cfg.n = Some(2);
        assert!(resolve(&cfg).is_err());
    }

    #[test]
    fn negative_tolerance_rejected() {
        let mut cfg = ScenarioConfig::bare("trivial_torus");
        cfg.tolerances = Some(ToleranceConfig {
            closure: Some(-1.0),
            integrator: None,
        });
        assert!(resolve(&cfg).is_err());
    }
}
