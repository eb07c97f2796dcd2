//! Per-layer makeup transfer, gated by [`Region::Transfer`] pixels.
//!
//! * detail: the reference detail layer replaces the input's;
//! * color: `(1 - alpha) * input + alpha * reference` on both chroma channels;
//! * structure: either illumination transfer (darken toward a darker
//!   reference by `(I_s - R_s)^2 / beta`, never past it), a literal copy of
//!   the reference structure, or the input structure unchanged.
//!
//! Pixels outside the transfer region keep the input layers.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::imgcore::{ensure_same, merge_lab, ImageError, LabImage, ScalarField};
use crate::layers::{recombined_lightness, LayerSet};
use crate::masks::{Region, RegionMap};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransferError {
    #[error("alpha must lie in [0, 1], got {0}")]
    AlphaRange(f64),
    #[error("beta must be positive, got {0}")]
    BetaRange(f64),
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureMode {
    /// Darken toward the reference illumination.
    #[default]
    Illumination,
    /// Replace the structure layer with the reference's.
    Literal,
    KeepInput,
}

impl std::str::FromStr for StructureMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "illumination" => Ok(Self::Illumination),
            "literal" => Ok(Self::Literal),
            "keep-input" | "keep_input" => Ok(Self::KeepInput),
            other => Err(format!("unknown structure mode `{other}` (expected illumination, literal or keep-input)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferParams {
    /// Weight of the reference chroma.
    pub alpha: f64,
    /// Illumination strength on the `[0, 100]` lightness scale; larger is
    /// gentler.
    pub beta: f64,
    /// With this off, [`StructureMode::Illumination`] keeps the input
    /// structure.
    pub illumination: bool,
    pub structure_mode: StructureMode,
}

impl Default for TransferParams {
    fn default() -> Self {
        Self {
            alpha: 0.95,
            beta: 30.0,
            illumination: true,
            structure_mode: StructureMode::Illumination,
        }
    }
}

impl TransferParams {
    pub fn validate(&self) -> Result<(), TransferError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(TransferError::AlphaRange(self.alpha));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(TransferError::BetaRange(self.beta));
        }
        Ok(())
    }

    /// Structure mode after applying the illumination switch.
    pub fn effective_structure_mode(&self) -> StructureMode {
        match self.structure_mode {
            StructureMode::Illumination if !self.illumination => StructureMode::KeepInput,
            mode => mode,
        }
    }
}

fn check_dims(fields: &[&ScalarField], regions: &RegionMap) -> Result<(), ImageError> {
    for f in fields {
        ensure_same(f.dims(), regions.dims())?;
    }
    Ok(())
}

fn select(input: &ScalarField, regions: &RegionMap, mut inside: impl FnMut(usize) -> f64) -> ScalarField {
    let (w, h) = input.dims();
    let values = input
        .values()
        .iter()
        .enumerate()
        .map(|(i, &v)| if regions.is_transfer(i) { inside(i) } else { v })
        .collect();
    ScalarField::from_raw(w, h, values)
}

/// Reference detail inside the transfer region, input detail elsewhere.
pub fn transfer_detail(input: &LayerSet, reference: &LayerSet, regions: &RegionMap) -> Result<ScalarField, TransferError> {
    check_dims(&[input.detail(), reference.detail()], regions)?;
    let r = reference.detail().values();
    Ok(select(input.detail(), regions, |i| r[i]))
}

pub fn blend_channel(input: f64, reference: f64, alpha: f64) -> f64 {
    (1.0 - alpha) * input + alpha * reference
}

/// Alpha-blends both chroma channels inside the transfer region.
pub fn transfer_color(
    input_ab: (&ScalarField, &ScalarField),
    reference_ab: (&ScalarField, &ScalarField),
    regions: &RegionMap,
    alpha: f64,
) -> Result<(ScalarField, ScalarField), TransferError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(TransferError::AlphaRange(alpha));
    }
    check_dims(&[input_ab.0, input_ab.1, reference_ab.0, reference_ab.1], regions)?;
    let (ra, rb) = (reference_ab.0.values(), reference_ab.1.values());
    let (ia, ib) = (input_ab.0.values(), input_ab.1.values());
    let a = select(input_ab.0, regions, |i| blend_channel(ia[i], ra[i], alpha));
    let b = select(input_ab.1, regions, |i| blend_channel(ib[i], rb[i], alpha));
    Ok((a, b))
}

/// Illumination correction of one structure sample. When the input is
/// brighter than the reference it is darkened by `(input - reference)^2 /
/// beta`, clamped so it never passes the reference; otherwise unchanged.
pub fn illuminate(input: f64, reference: f64, beta: f64) -> f64 {
    if input > reference {
        let gap = input - reference;
        (input - gap * gap / beta).clamp(reference, input)
    } else {
        input
    }
}

pub fn illumination_transfer(
    input_s: &ScalarField,
    reference_s: &ScalarField,
    regions: &RegionMap,
    beta: f64,
) -> Result<ScalarField, TransferError> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(TransferError::BetaRange(beta));
    }
    check_dims(&[input_s, reference_s], regions)?;
    let (i_s, r_s) = (input_s.values(), reference_s.values());
    Ok(select(input_s, regions, |i| illuminate(i_s[i], r_s[i], beta)))
}

/// Reference structure inside the transfer region.
pub fn transfer_structure_literal(
    input_s: &ScalarField,
    reference_s: &ScalarField,
    regions: &RegionMap,
) -> Result<ScalarField, TransferError> {
    check_dims(&[input_s, reference_s], regions)?;
    let r = reference_s.values();
    Ok(select(input_s, regions, |i| r[i]))
}

/// Runs every layer transfer and recombines the result into a Lab image.
pub fn apply_transfer(
    input: &LayerSet,
    reference: &LayerSet,
    regions: &RegionMap,
    params: &TransferParams,
) -> Result<LabImage, TransferError> {
    params.validate()?;
    ensure_same(input.dims(), reference.dims())?;
    ensure_same(input.dims(), regions.dims())?;

    let structure = match params.effective_structure_mode() {
        StructureMode::Illumination => {
            illumination_transfer(input.structure(), reference.structure(), regions, params.beta)?
        }
        StructureMode::Literal => transfer_structure_literal(input.structure(), reference.structure(), regions)?,
        StructureMode::KeepInput => input.structure().clone(),
    };
    let detail = transfer_detail(input, reference, regions)?;
    let (a, b) = transfer_color((input.a(), input.b()), (reference.a(), reference.b()), regions, params.alpha)?;

    let (w, h) = input.dims();
    let lightness = structure
        .values()
        .iter()
        .zip(detail.values())
        .map(|(&s, &d)| recombined_lightness(s, d))
        .collect();
    Ok(merge_lab(ScalarField::from_raw(w, h, lightness), a, b)?)
}

/// Count of pixels per region, in `[transfer, protected, ignored]` order.
pub fn region_histogram(regions: &RegionMap) -> [usize; 3] {
    let mut counts = [0; 3];
    for r in regions.regions() {
        counts[match r {
            Region::Transfer => 0,
            Region::Protected => 1,
            Region::Ignored => 2,
        }] += 1;
    }
    counts
}
