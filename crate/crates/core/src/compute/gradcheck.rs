//! Central finite-difference gradient checking.

use crate::compute::{GradStore, ParamStore, Tape, Var};
use crate::error::{Error, Result};

/// Step used for central differences.
pub const FD_STEP: f64 = 1e-6;

/// Denominator floor for the relative error, so entries whose true gradient
/// is near zero are compared on an absolute scale instead.
pub const REL_ERROR_FLOOR: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat entry index of the worst mismatch.
    pub worst: Option<(String, usize)>,
    pub entries_checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// `|analytic - numeric| / max(|numeric|, REL_ERROR_FLOOR)`
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / numeric.abs().max(REL_ERROR_FLOOR)
}

/// Numeric gradient of the scalar `out` w.r.t. every trainable parameter entry.
///
/// Parameters are perturbed in place and restored bit-for-bit afterwards.
pub fn numeric_gradients(tape: &mut Tape, out: Var, params: &mut ParamStore, step: f64) -> Result<GradStore> {
    let shape = tape.shape(out);
    if shape != [1, 1] {
        return Err(Error::NotScalar(shape));
    }
    let mut numeric = GradStore::for_params(params);
    let ids: Vec<_> = params.iter().filter(|(_, p)| p.trainable).map(|(id, _)| id).collect();
    for id in ids {
        for k in 0..params.value(id).len() {
            let orig = params.value(id).data()[k];
            params.value_mut(id).data_mut()[k] = orig + step;
            tape.evaluate(params)?;
            let plus = tape.value(out).map(|t| t.item()).unwrap_or(0.0);
            params.value_mut(id).data_mut()[k] = orig - step;
            tape.evaluate(params)?;
            let minus = tape.value(out).map(|t| t.item()).unwrap_or(0.0);
            params.value_mut(id).data_mut()[k] = orig;
            numeric.get_mut(id).data_mut()[k] = (plus - minus) / (2.0 * step);
        }
    }
    tape.evaluate(params)?;
    Ok(numeric)
}

/// Compares two gradient stores entry by entry over trainable parameters.
pub fn compare_gradients(
    params: &ParamStore,
    analytic: &GradStore,
    numeric: &GradStore,
    tolerance: f64,
) -> GradCheckReport {
    let mut max_rel_error = 0.0;
    let mut worst = None;
    let mut entries_checked = 0;
    for (id, p) in params.iter().filter(|(_, p)| p.trainable) {
        let (a, n) = (analytic.get(id).data(), numeric.get(id).data());
        for (k, (&av, &nv)) in a.iter().zip(n).enumerate() {
            entries_checked += 1;
            let err = relative_error(av, nv);
            if err > max_rel_error || err.is_nan() {
                max_rel_error = if err.is_nan() { f64::INFINITY } else { err };
                worst = Some((p.name.clone(), k));
            }
        }
    }
    GradCheckReport {
        max_rel_error,
        worst,
        entries_checked,
        tolerance,
        passed: max_rel_error <= tolerance,
    }
}

/// Checks the analytic gradient of a scalar record against central finite
/// differences with step [`FD_STEP`].
pub fn grad_check(tape: &mut Tape, out: Var, params: &mut ParamStore, tolerance: f64) -> Result<GradCheckReport> {
    let shape = tape.shape(out);
    if shape != [1, 1] {
        return Err(Error::NotScalar(shape));
    }
    tape.evaluate(params)?;
    let mut analytic = GradStore::for_params(params);
    tape.backward_scalar(params, out, &mut analytic)?;
    let numeric = numeric_gradients(tape, out, params, FD_STEP)?;
    Ok(compare_gradients(params, &analytic, &numeric, tolerance))
}
