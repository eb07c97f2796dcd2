//! `POST /transfer`: multipart upload in, PNG out.
//!
//! Fields: `input` (image), `input_landmarks` (JSON), `input_labels` (PNG),
//! then either `reference_id` or the uploaded triple `reference`,
//! `reference_landmarks`, `reference_labels`, plus optional parameters
//! `alpha`, `beta`, `illumination`, `structure_mode`, `airbangs`,
//! `skip_preprocess`.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

use axum::extract::{Multipart, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use makeup_core::align::parse_landmarks;
use makeup_core::io::{decode_raster, encode_png, probe_dimensions};
use makeup_core::masks::parse_label_map;
use makeup_core::transfer::StructureMode;
use makeup_core::{run_in_memory, FaceBundle, Settings};
use sha2::{Digest, Sha256};

use crate::{ApiError, AppState, MAX_SIDE};

const KNOWN_FIELDS: [&str; 13] = [
    "input",
    "input_landmarks",
    "input_labels",
    "reference_id",
    "reference",
    "reference_landmarks",
    "reference_labels",
    "alpha",
    "beta",
    "illumination",
    "structure_mode",
    "airbangs",
    "skip_preprocess",
];

pub const CHECKSUM_HEADER: &str = "x-output-checksum";

type Fields = BTreeMap<String, Vec<u8>>;

async fn collect_fields(mut multipart: Multipart) -> Result<Fields, ApiError> {
    let mut fields = Fields::new();
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request("malformed_multipart", e.body_text()))?
    {
        let name = field.name().unwrap_or_default().to_owned();
        if !KNOWN_FIELDS.contains(&name.as_str()) {
            return Err(ApiError::bad_request("unknown_field", format!("unexpected field {name:?}")));
        }
        let bytes = field
            .bytes()
            .await
            .map_err(|e| ApiError::bad_request("malformed_multipart", e.body_text()))?;
        if fields.insert(name.clone(), bytes.to_vec()).is_some() {
            return Err(ApiError::bad_request("duplicate_field", format!("field {name:?} given twice")));
        }
    }
    Ok(fields)
}

fn text<'a>(fields: &'a Fields, name: &str) -> Result<Option<&'a str>, ApiError> {
    fields
        .get(name)
        .map(|b| {
            std::str::from_utf8(b)
                .map(str::trim)
                .map_err(|_| ApiError::bad_request("invalid_parameter", format!("{name} is not UTF-8")))
        })
        .transpose()
}

fn parsed<T: FromStr>(fields: &Fields, name: &str) -> Result<Option<T>, ApiError> {
    text(fields, name)?
        .map(|s| {
            s.parse()
                .map_err(|_| ApiError::bad_request("invalid_parameter", format!("cannot parse {name} = {s:?}")))
        })
        .transpose()
}

fn flag(fields: &Fields, name: &str) -> Result<Option<bool>, ApiError> {
    text(fields, name)?
        .map(|s| match s.to_ascii_lowercase().as_str() {
            "true" | "1" | "on" | "yes" => Ok(true),
            "false" | "0" | "off" | "no" => Ok(false),
            _ => Err(ApiError::bad_request("invalid_parameter", format!("{name} must be a boolean, got {s:?}"))),
        })
        .transpose()
}

/// Settings from the form; range checks happen in the pipeline.
pub fn settings_from_fields(fields: &Fields) -> Result<Settings, ApiError> {
    let mut s = Settings::default();
    if let Some(v) = parsed(fields, "alpha")? {
        s.transfer.alpha = v;
    }
    if let Some(v) = parsed(fields, "beta")? {
        s.transfer.beta = v;
    }
    if let Some(v) = flag(fields, "illumination")? {
        s.transfer.illumination = v;
    }
    if let Some(v) = parsed::<StructureMode>(fields, "structure_mode")? {
        s.transfer.structure_mode = v;
    }
    if let Some(v) = flag(fields, "airbangs")? {
        s.airbangs = v;
    }
    if let Some(v) = flag(fields, "skip_preprocess")? {
        s.skip_preprocess = v;
    }
    Ok(s)
}

fn face_from_fields(fields: &Fields, image: &str, landmarks: &str, labels: &str) -> Result<FaceBundle, ApiError> {
    let bytes = fields
        .get(image)
        .ok_or_else(|| ApiError::bad_request("missing_field", format!("{image} is required")))?;
    let (w, h) = probe_dimensions(bytes).map_err(|e| ApiError::bad_request("invalid_image", format!("{image}: {e}")))?;
    if w > MAX_SIDE || h > MAX_SIDE {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "image_too_large",
            format!("{image} is {w}x{h}; the limit is {MAX_SIDE}x{MAX_SIDE}"),
        ));
    }
    let raster = decode_raster(bytes).map_err(|e| ApiError::bad_request("invalid_image", format!("{image}: {e}")))?;
    let lm_text = text(fields, landmarks)?.ok_or_else(|| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "landmarks_required",
            format!("{landmarks} is required; faces are not detected automatically"),
        )
    })?;
    let lm = parse_landmarks(lm_text, w, h)
        .map_err(|e| ApiError::bad_request("invalid_landmarks", format!("{landmarks}: {e}")))?;
    let label_bytes = fields.get(labels).ok_or_else(|| {
        ApiError::new(
            StatusCode::UNPROCESSABLE_ENTITY,
            "labels_required",
            format!("{labels} is required; faces are not parsed automatically"),
        )
    })?;
    let label_map = parse_label_map(label_bytes, (w, h))
        .map_err(|e| ApiError::bad_request("invalid_labels", format!("{labels}: {e}")))?;
    FaceBundle::new(raster, lm, label_map).map_err(|e| ApiError::bad_request("invalid_labels", e.to_string()))
}

fn reference_face(state: &AppState, fields: &Fields) -> Result<Arc<FaceBundle>, ApiError> {
    let uploaded = fields.contains_key("reference");
    match (text(fields, "reference_id")?, uploaded) {
        (Some(_), true) => Err(ApiError::bad_request(
            "ambiguous_reference",
            "give either reference_id or an uploaded reference, not both",
        )),
        (Some(id), false) => {
            let entry = state.gallery.get(id).ok_or_else(|| {
                ApiError::new(StatusCode::NOT_FOUND, "unknown_reference", format!("no reference {id:?}"))
            })?;
            entry.face.clone().ok_or_else(|| {
                ApiError::new(
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "reference_incomplete",
                    format!("reference {id:?} lacks landmarks or labels"),
                )
            })
        }
        (None, true) => Ok(Arc::new(face_from_fields(fields, "reference", "reference_landmarks", "reference_labels")?)),
        (None, false) => Err(ApiError::bad_request("missing_field", "reference_id or reference is required")),
    }
}

pub fn checksum(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub async fn transfer(State(state): State<Arc<AppState>>, multipart: Multipart) -> Result<Response, ApiError> {
    let fields = collect_fields(multipart).await?;
    let settings = settings_from_fields(&fields)?;
    let input = face_from_fields(&fields, "input", "input_landmarks", "input_labels")?;
    let reference = reference_face(&state, &fields)?;

    let (png, report) = tokio::task::spawn_blocking(move || {
        let outcome = run_in_memory(&input, &reference, &settings, false)?;
        let png = encode_png(&outcome.image)
            .map_err(|e| makeup_core::PipelineError::new(makeup_core::Stage::Write, e))?;
        Ok::<_, makeup_core::PipelineError>((png, outcome.report))
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "worker_failed", e.to_string()))??;

    let mut response = png.clone().into_response();
    let headers = response.headers_mut();
    headers.insert(header::CONTENT_TYPE, HeaderValue::from_static("image/png"));
    let timing = HeaderValue::from_str(&report.timing_header()).expect("timing header is ASCII");
    headers.insert("server-timing", timing);
    headers.insert(CHECKSUM_HEADER, HeaderValue::from_str(&checksum(&png)).expect("hex is ASCII"));
    for warning in &report.warnings {
        if let Ok(v) = HeaderValue::from_str(warning) {
            headers.append("x-pipeline-warning", v);
        }
    }
    Ok(response)
}
