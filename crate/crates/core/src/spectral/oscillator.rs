use super::sturm_liouville::{solve_sl_dirichlet, EigenSolution1D, Grid1D, SpectralWindow};
use crate::error::{QciError, Result};
use crate::models::HarmonicOscillatorModel;

/// Nodes on `[-L, L]`: twelve per `h` of length, at least 1025.
pub fn default_grid_points(truncation: f64, h: f64) -> usize {
    1024usize.max((12.0 * 2.0 * truncation / h).ceil() as usize) + 1
}

/// Eigenpairs of `-h²∂² + x²` on `[-L, L]` with Dirichlet ends.
pub fn ho_eigs(model: &HarmonicOscillatorModel, h: f64, window: SpectralWindow) -> Result<Vec<EigenSolution1D>> {
    model.check()?;
    if !(model.truncation > 2.0 * window.center.max(0.0).sqrt()) {
        return Err(QciError::InvalidInput(format!(
            "truncation L = {} must exceed 2√center = {}",
            model.truncation,
            2.0 * window.center.max(0.0).sqrt()
        )));
    }
    let l = model.truncation;
    let grid = Grid1D::closed(-l, l, default_grid_points(l, h))?;
    let v = grid.sample(|x| x * x);
    solve_sl_dirichlet(&v, h, &grid, window)
}
