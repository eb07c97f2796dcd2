//! Layer decomposition of a CIELAB face image.
//!
//! Lightness is split into a large-scale structure layer, obtained with an
//! edge-preserving weighted-least-squares (WLS) smoother, and the residual
//! detail layer. The chroma channels form the color layer unchanged.
//!
//! The smoother returns the minimizer `u` of
//!
//! ```text
//! sum_p (u_p - L_p)^2 + lambda * sum_p [ w_x(p) (du/dx)_p^2 + w_y(p) (du/dy)_p^2 ]
//! w(p) = 1 / (|d log(L + 1)|^alpha + epsilon)
//! ```
//!
//! which is the solution of the sparse SPD system `(I + lambda A) u = L`.

pub mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::{ensure_same, merge_lab, split_luminance, ImageError, LabImage, ScalarField};
use solver::{banded_cholesky, conjugate_gradient, FivePointSystem, SolveMethod, SolveStats};

/// Largest side for which [`SolverChoice::Auto`] factorizes directly.
pub const DIRECT_SOLVE_MAX_SIDE: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WlsError {
    #[error("invalid WLS parameters: {0}")]
    InvalidParams(String),
    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverChoice {
    /// Direct factorization up to [`DIRECT_SOLVE_MAX_SIDE`], CG above.
    #[default]
    Auto,
    Direct,
    ConjugateGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WlsParams {
    pub lambda: f64,
    /// Exponent on the guide gradient magnitude.
    pub alpha: f64,
    pub epsilon: f64,
    #[serde(rename = "cg_tol")]
    pub cg_tolerance: f64,
    pub cg_max_iters: usize,
    pub solver: SolverChoice,
}

impl Default for WlsParams {
    fn default() -> Self {
        Self {
            lambda: 0.2,
            alpha: 1.2,
            epsilon: 1e-4,
            cg_tolerance: 1e-4,
            cg_max_iters: 1000,
            solver: SolverChoice::Auto,
        }
    }
}

impl WlsParams {
    pub fn with_lambda(self, lambda: f64) -> Self {
        Self { lambda, ..self }
    }

    pub fn validate(&self) -> Result<(), WlsError> {
        let bad = |what: &str, v: f64| Err(WlsError::InvalidParams(format!("{what} = {v}")));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda", self.lambda);
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha", self.alpha);
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon", self.epsilon);
        }
        if !(self.cg_tolerance > 0.0 && self.cg_tolerance.is_finite()) {
            return bad("cg_tol", self.cg_tolerance);
        }
        if self.cg_max_iters == 0 {
            return Err(WlsError::InvalidParams("cg_max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// Builds `I + lambda A` for lightness `l` (exposed for oracle checks).
pub fn wls_system(l: &ScalarField, params: &WlsParams) -> FivePointSystem {
    let (w, h) = l.dims();
    let guide: Vec<f64> = l.values().iter().map(|v| (v.max(0.0) + 1.0).ln()).collect();
    let weight = |a: f64, b: f64| params.lambda / ((a - b).abs().powf(params.alpha) + params.epsilon);
    let mut east = vec![0.0; w * h];
    let mut south = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            if x + 1 < w {
                east[p] = weight(guide[p + 1], guide[p]);
            }
            if y + 1 < h {
                south[p] = weight(guide[p + w], guide[p]);
            }
        }
    }
    FivePointSystem::new(w, h, east, south)
}

pub fn wls_filter(l: &ScalarField, params: &WlsParams) -> Result<ScalarField, WlsError> {
    wls_filter_with_stats(l, params).map(|(f, _)| f)
}

pub fn wls_filter_with_stats(l: &ScalarField, params: &WlsParams) -> Result<(ScalarField, SolveStats), WlsError> {
    params.validate()?;
    let (w, h) = l.dims();
    if params.lambda == 0.0 {
        let stats = SolveStats {
            method: SolveMethod::Identity,
            iterations: 0,
            relative_residual: 0.0,
        };
        return Ok((l.clone(), stats));
    }
    let system = wls_system(l, params);
    let direct = match params.solver {
        SolverChoice::Auto => w <= DIRECT_SOLVE_MAX_SIDE && h <= DIRECT_SOLVE_MAX_SIDE,
        SolverChoice::Direct => true,
        SolverChoice::ConjugateGradient => false,
    };
    let (u, stats) = if direct {
        banded_cholesky(&system, l.values())
    } else {
        conjugate_gradient(&system, l.values(), params.cg_tolerance, params.cg_max_iters)
            .map_err(|(iterations, residual)| WlsError::NotConverged { iterations, residual })?
    };
    Ok((ScalarField::new(w, h, u)?, stats))
}

/// Structure, detail and color layers of one face image.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSet {
    structure: ScalarField,
    detail: ScalarField,
    a: ScalarField,
    b: ScalarField,
}

impl LayerSet {
    pub fn new(structure: ScalarField, detail: ScalarField, a: ScalarField, b: ScalarField) -> Result<Self, ImageError> {
        ensure_same(structure.dims(), detail.dims())?;
        ensure_same(structure.dims(), a.dims())?;
        ensure_same(structure.dims(), b.dims())?;
        Ok(Self {
            structure,
            detail,
            a,
            b,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        self.structure.dims()
    }

    pub fn structure(&self) -> &ScalarField {
        &self.structure
    }

    pub fn detail(&self) -> &ScalarField {
        &self.detail
    }

    pub fn a(&self) -> &ScalarField {
        &self.a
    }

    pub fn b(&self) -> &ScalarField {
        &self.b
    }
}

pub fn decompose(img: &LabImage, params: &WlsParams) -> Result<LayerSet, WlsError> {
    decompose_with_stats(img, params).map(|(layers, _)| layers)
}

pub fn decompose_with_stats(img: &LabImage, params: &WlsParams) -> Result<(LayerSet, SolveStats), WlsError> {
    let (l, a, b) = split_luminance(img);
    let (structure, stats) = wls_filter_with_stats(&l, params)?;
    let (w, h) = l.dims();
    let detail: Vec<f64> = l.values().iter().zip(structure.values()).map(|(l, s)| l - s).collect();
    let detail = ScalarField::new(w, h, detail)?;
    Ok((LayerSet::new(structure, detail, a, b)?, stats))
}

/// Lightness of recombined layers, `s + d` clamped to `[0, 100]`.
pub(crate) fn recombined_lightness(s: f64, d: f64) -> f64 {
    (s + d).clamp(0.0, 100.0)
}

pub fn recompose(layers: &LayerSet) -> LabImage {
    let (w, h) = layers.dims();
    let l = layers
        .structure
        .values()
        .iter()
        .zip(layers.detail.values())
        .map(|(&s, &d)| recombined_lightness(s, d))
        .collect();
    merge_lab(ScalarField::from_raw(w, h, l), layers.a.clone(), layers.b.clone()).expect("layer dimensions agree")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::rgb_to_lab;
    use crate::synthetic::{FaceGeometry, MakeupStyle};

    fn ramp(w: usize, h: usize) -> ScalarField {
        ScalarField::from_fn(w, h, |x, y| 20.0 + 3.0 * x as f64 + if y > h / 2 { 30.0 } else { 0.0 }).unwrap()
    }

    #[test]
    fn constant_field_is_fixed() {
        let f = ScalarField::filled(20, 11, 37.5).unwrap();
        for solver in [SolverChoice::Direct, SolverChoice::ConjugateGradient] {
            let p = WlsParams { solver, ..WlsParams::default() };
            let out = wls_filter(&f, &p).unwrap();
            assert!(out.values().iter().all(|v| (v - 37.5).abs() < 1e-6));
        }
    }

    #[test]
    fn zero_lambda_is_identity() {
        let f = ramp(9, 7);
        let out = wls_filter(&f, &WlsParams::default().with_lambda(0.0)).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn rejects_bad_params() {
        let f = ramp(3, 3);
        for p in [
            WlsParams { lambda: -1.0, ..Default::default() },
            WlsParams { alpha: 0.0, ..Default::default() },
            WlsParams { epsilon: 0.0, ..Default::default() },
            WlsParams { cg_tolerance: 0.0, ..Default::default() },
            WlsParams { cg_max_iters: 0, ..Default::default() },
        ] {
            assert!(matches!(wls_filter(&f, &p), Err(WlsError::InvalidParams(_))));
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let f = ramp(80, 80);
        let p = WlsParams { cg_tolerance: 1e-12, cg_max_iters: 3, solver: SolverChoice::ConjugateGradient, ..Default::default() };
        match wls_filter(&f, &p) {
            Err(WlsError::NotConverged { iterations: 3, residual }) => assert!(residual > 1e-12),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn edges_survive_smoothing() {
        // A step edge keeps most of its height while flat parts stay flat.
        let f = ScalarField::from_fn(32, 8, |x, _| if x < 16 { 30.0 } else { 70.0 }).unwrap();
        let out = wls_filter(&f, &WlsParams::default()).unwrap();
        assert!(out.get(15, 4) < 31.0 && out.get(16, 4) > 69.0);
    }

    #[test]
    fn decomposition_identity_and_constant_gray() {
        let geo = FaceGeometry::centered(96, 96);
        let lab = rgb_to_lab(&geo.render(MakeupStyle::Bare, 7));
        let layers = decompose(&lab, &WlsParams::default()).unwrap();
        for ((s, d), l) in layers.structure().values().iter().zip(layers.detail().values()).zip(lab.l().values()) {
            assert!((s + d - l).abs() <= 1e-6);
        }
        let back = recompose(&layers);
        for (x, y) in back.l().values().iter().zip(lab.l().values()) {
            assert!((x - y).abs() <= 1e-6);
        }
        assert_eq!(back.a(), lab.a());

        let gray = LabImage::from_fn(10, 10, |_, _| [55.0, 1.0, -2.0]).unwrap();
        let gl = decompose(&gray, &WlsParams::default()).unwrap();
        assert!(gl.detail().values().iter().all(|d| d.abs() < 1e-6));
    }

    #[test]
    fn recompose_clamps_and_zero_is_black() {
        let f = |v| ScalarField::filled(2, 2, v).unwrap();
        let layers = LayerSet::new(f(90.0), f(30.0), f(0.0), f(0.0)).unwrap();
        assert!(recompose(&layers).l().values().iter().all(|&v| v == 100.0));
        let zero = LayerSet::new(f(0.0), f(0.0), f(0.0), f(0.0)).unwrap();
        let rgb = crate::imgcore::lab_to_rgb(&recompose(&zero));
        assert!(rgb.pixels().iter().all(|&v| v == 0));
        assert!(LayerSet::new(f(0.0), ScalarField::filled(3, 2, 0.0).unwrap(), f(0.0), f(0.0)).is_err());
    }

    #[test]
    fn detail_energy_grows_with_lambda() {
        let geo = FaceGeometry::centered(96, 96);
        let lab = rgb_to_lab(&geo.render(MakeupStyle::Bare, 3));
        let norms: Vec<f64> = [0.05, 0.2, 0.8]
            .iter()
            .map(|&lambda| decompose(&lab, &WlsParams::default().with_lambda(lambda)).unwrap().detail().norm())
            .collect();
        assert!(norms[0] < norms[1] && norms[1] < norms[2], "{norms:?}");
    }
}
