use crate::error::{Error, Result};
use crate::rational::FrameRate;

/// `T × K × 2` point trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkTrack {
    pub num_frames: usize,
    pub num_points: usize,
    pub coords: Vec<f64>,
}

impl LandmarkTrack {
    pub fn new(num_frames: usize, num_points: usize, coords: Vec<f64>) -> Result<Self> {
        if coords.len() != num_frames * num_points * 2 {
            return Err(Error::shape(format!(
                "landmark track needs {} values, got {}",
                num_frames * num_points * 2,
                coords.len()
            )));
        }
        Ok(LandmarkTrack {
            num_frames,
            num_points,
            coords,
        })
    }
}

/// Temporal Gaussian smoothing of every coordinate. The kernel is truncated
/// at 3 sigma and renormalized where it runs off either end of the track.
pub fn smooth_landmarks(track: &LandmarkTrack, sigma_secs: f64, fps: FrameRate) -> Result<LandmarkTrack> {
    if track.num_frames == 0 {
        return Err(Error::EmptyInput("landmark track has no frames".into()));
    }
    if !(sigma_secs > 0.0) {
        return Err(Error::ConfigError(format!("sigma must be positive, got {sigma_secs}")));
    }
    let sigma = sigma_secs * fps.as_f64();
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let t_len = track.num_frames as isize;
    let stride = track.num_points * 2;
    let mut out = vec![0.0; track.coords.len()];
    for t in 0..t_len {
        let mut norm = 0.0;
        let row = &mut out[t as usize * stride..(t as usize + 1) * stride];
        for (k, &w) in kernel.iter().enumerate() {
            let s = t + k as isize - radius;
            if !(0..t_len).contains(&s) {
                continue;
            }
            norm += w;
            let src = &track.coords[s as usize * stride..(s as usize + 1) * stride];
            crate::linalg::axpy(w, src, row);
        }
        row.iter_mut().for_each(|v| *v /= norm);
    }
    LandmarkTrack::new(track.num_frames, track.num_points, out)
}
