use super::{DemandCurve, DemandReference, ModelError};

/// Aggregate price elasticity: sector elasticities weighted by their shares.
pub fn calibrate_elasticity(reference: &DemandReference) -> Result<f64, ModelError> {
    let eta = reference.elasticity.as_array();
    if let Some(&bad) = eta.iter().find(|e| !(**e < 0.0)) {
        return Err(ModelError::NonNegativeElasticity(bad));
    }
    let shares = reference.shares.as_array();
    if shares.iter().any(|s| !(*s >= 0.0)) {
        return Err(ModelError::InvalidReference("sector shares must be non-negative".into()));
    }
    let total: f64 = shares.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(ModelError::InvalidReference(format!(
            "sector shares sum to {total}, expected 1"
        )));
    }
    let agg: f64 = eta.iter().zip(shares.iter()).map(|(e, s)| e * s).sum();
    if !(agg < 0.0) {
        return Err(ModelError::NonNegativeElasticity(agg));
    }
    Ok(agg)
}

/// Linear inverse demand through the reference point with the given
/// aggregate elasticity.
pub fn curve_from_elasticity(wtp: f64, dmd: f64, eta: f64) -> Result<DemandCurve, ModelError> {
    if !(eta < 0.0) {
        return Err(ModelError::NonNegativeElasticity(eta));
    }
    if !(wtp > 0.0) || !(dmd > 0.0) {
        return Err(ModelError::InvalidReference(format!(
            "willingness to pay ({wtp}) and demand ({dmd}) must be positive"
        )));
    }
    Ok(DemandCurve {
        intercept: (1.0 - 1.0 / eta) * wtp,
        slope: wtp / (dmd * eta),
    })
}

pub fn calibrate_demand(reference: &DemandReference) -> Result<DemandCurve, ModelError> {
    let eta = calibrate_elasticity(reference)?;
    curve_from_elasticity(reference.wtp, reference.dmd, eta)
}
