//! Brute-force reference renderer: traces every pixel's axon and sums every
//! electrode at every segment. No pruning, no precomputation.

use super::{AmplitudeFrame, AxonMapParams, ElectrodeGrid, PerceptFrame, RenderError, Retina};
use crate::exec::Exec;
use crate::retina::{trace_bundle, PerceptGrid, Point};

/// Pre-clip activation of the ganglion cell at `soma`. Somata inside the
/// optic disc do not exist and return 0.
pub fn oracle_pixel(
    soma: Point,
    amps: &AmplitudeFrame,
    grid: &ElectrodeGrid,
    params: &AxonMapParams,
    retina: &Retina,
) -> Result<f64, RenderError> {
    if retina.frame.inside_disc(soma) {
        return Ok(0.0);
    }
    let bundle = trace_bundle(soma, &retina.frame, &retina.bundles)?;
    let mut best = 0.0f64;
    for (seg, &len) in bundle.segments.iter().zip(&bundle.cumulative_path_length) {
        if params.lambda_um == 0.0 && len > 0.0 {
            // the axonal factor is exactly zero beyond the soma
            break;
        }
        let axonal = params.axonal(len);
        let drive: f64 = grid
            .positions()
            .iter()
            .zip(&amps.values)
            .map(|(e, a)| a * params.spatial(seg.dist_sq(*e)))
            .sum();
        best = best.max(axonal * drive);
    }
    Ok(best)
}

/// Pre-clip activations for every pixel of `percept`.
pub fn oracle_response(
    exec: Exec,
    amps: &AmplitudeFrame,
    grid: &ElectrodeGrid,
    params: &AxonMapParams,
    percept: &PerceptGrid,
    retina: &Retina,
) -> Result<Vec<f64>, RenderError> {
    params.validate()?;
    retina.validate()?;
    amps.check_shape(grid)?;
    exec.map_slice(percept.soma_positions(), |&soma| oracle_pixel(soma, amps, grid, params, retina))
        .into_iter()
        .collect()
}

pub fn render_oracle(
    amps: &AmplitudeFrame,
    grid: &ElectrodeGrid,
    params: &AxonMapParams,
    percept: &PerceptGrid,
    retina: &Retina,
) -> Result<PerceptFrame, RenderError> {
    render_oracle_with(Exec::default(), amps, grid, params, percept, retina)
}

pub fn render_oracle_with(
    exec: Exec,
    amps: &AmplitudeFrame,
    grid: &ElectrodeGrid,
    params: &AxonMapParams,
    percept: &PerceptGrid,
    retina: &Retina,
) -> Result<PerceptFrame, RenderError> {
    let raw = oracle_response(exec, amps, grid, params, percept, retina)?;
    Ok(PerceptFrame::from_response(percept, &raw, amps.frame_index))
}
