use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Face-track geometry attached to an utterance. Fields are optional so that
/// missing values are reported rather than defaulted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FaceMeta {
    pub eye_distance_px: Option<f64>,
    pub bbox_diagonal_px: Option<f64>,
    pub pan_deg: Option<f64>,
    pub tilt_deg: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QualityBucket {
    High,
    Low,
}

/// High when the eyes are at least 80 px apart, the box diagonal is at least
/// 300 px, |pan| is at most 30 degrees and |tilt| is under 10 degrees.
pub fn quality_bucket(meta: &FaceMeta) -> Result<QualityBucket> {
    let eye = meta.eye_distance_px.ok_or(Error::MissingMetadata("eye_distance_px"))?;
    let diag = meta.bbox_diagonal_px.ok_or(Error::MissingMetadata("bbox_diagonal_px"))?;
    let pan = meta.pan_deg.ok_or(Error::MissingMetadata("pan_deg"))?;
    let tilt = meta.tilt_deg.ok_or(Error::MissingMetadata("tilt_deg"))?;
    Ok(if eye >= 80.0 && diag >= 300.0 && pan.abs() <= 30.0 && tilt.abs() < 10.0 {
        QualityBucket::High
    } else {
        QualityBucket::Low
    })
}
