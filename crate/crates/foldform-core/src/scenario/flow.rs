//! Flagship vector field of each scenario, for trajectory export: the Reeb
//! field of the standard product form, the boundary Reeb field of the
//! cotangent scenario, or the middle-piece Reeb field of the folded sums.

use alloc::vec;

use super::{ScenarioId, ScenarioParams};
use crate::chart::ChartRef;
use crate::error::Result;
use crate::expr::ScalarExpr;
use crate::form::VectorField;

pub fn flow_field(id: ScenarioId, params: &ScenarioParams) -> Result<(ChartRef, VectorField)> {
    match id {
        ScenarioId::TrivialTorus => {
            let n = params.n.clamp(1, 2);
            let torus = super::torus::build_disk_torus(n, false, params)?;
            let chart = torus.spec.total.clone();
            let mut comps = vec![ScalarExpr::zero(); chart.dim()];
            comps[chart.dim() - 1] = ScalarExpr::constant(1.0 / params.k_standard);
            Ok((chart.clone(), VectorField::new(&chart, comps)?))
        }
        ScenarioId::CotangentT3 => {
            let assets = super::cotangent::build_assets()?;
            Ok((assets.fiber.clone(), assets.boundary_reeb))
        }
        ScenarioId::FoldedSpheres | ScenarioId::Custom => {
            let folded = super::folded::build_folded_spheres(params)?;
            let reeb = crate::folding::folded_reeb_field(&folded)?;
            Ok((folded.middle.chart.clone(), reeb.middle))
        }
        ScenarioId::FoldedT3 => {
            let folded = super::folded::build_folded_t3(params)?;
            let reeb = crate::folding::folded_reeb_field(&folded)?;
            Ok((folded.middle.chart.clone(), reeb.middle))
        }
    }
}
