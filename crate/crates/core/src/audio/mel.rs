use super::Spectrogram;
use crate::error::{Error, Result};

pub const DEFAULT_LOG_FLOOR: f64 = 1e-12;

pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Triangular filters with vertices equally spaced on the mel scale.
#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    pub num_filters: usize,
    pub fft_size: usize,
    pub sample_rate: u32,
    pub low_hz: f64,
    pub high_hz: f64,
    /// `num_filters × (fft_size / 2 + 1)`, row-major.
    pub weights: Vec<f64>,
    /// Peak frequency of each filter.
    pub centers_hz: Vec<f64>,
}

impl MelFilterbank {
    pub fn new(num_filters: usize, fft_size: usize, sample_rate: u32, low_hz: f64, high_hz: f64) -> Result<Self> {
        let nyquist = sample_rate as f64 / 2.0;
        if num_filters == 0 {
            return Err(Error::InvalidFilterSpec("num_filters must be at least 1".into()));
        }
        if fft_size < 2 || !(low_hz >= 0.0 && low_hz < high_hz && high_hz <= nyquist) {
            return Err(Error::InvalidFilterSpec(format!(
                "need 0 <= low ({low_hz}) < high ({high_hz}) <= {nyquist} and fft_size >= 2"
            )));
        }
        let bins = fft_size / 2 + 1;
        let (mlo, mhi) = (hz_to_mel(low_hz), hz_to_mel(high_hz));
        let step = (mhi - mlo) / (num_filters + 1) as f64;
        let vertices: Vec<f64> = (0..num_filters + 2).map(|i| mel_to_hz(mlo + step * i as f64)).collect();
        let bin_hz = sample_rate as f64 / fft_size as f64;
        let mut weights = vec![0.0; num_filters * bins];
        for j in 0..num_filters {
            let (left, center, right) = (vertices[j], vertices[j + 1], vertices[j + 2]);
            let row = &mut weights[j * bins..(j + 1) * bins];
            for (k, w) in row.iter_mut().enumerate() {
                let f = k as f64 * bin_hz;
                *w = if f > left && f <= center {
                    (f - left) / (center - left)
                } else if f > center && f < right {
                    (right - f) / (right - center)
                } else {
                    0.0
                };
            }
            if row.iter().sum::<f64>() <= 0.0 {
                return Err(Error::InvalidFilterSpec(format!(
                    "filter {j} ({left:.1}-{right:.1} Hz) falls between FFT bins; use fewer filters or a larger FFT"
                )));
            }
        }
        Ok(MelFilterbank {
            num_filters,
            fft_size,
            sample_rate,
            low_hz,
            high_hz,
            weights,
            centers_hz: vertices[1..=num_filters].to_vec(),
        })
    }

    pub fn bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    pub fn row(&self, j: usize) -> &[f64] {
        let b = self.bins();
        &self.weights[j * b..(j + 1) * b]
    }
}

/// `ln(max(floor, W |X|^2))` for every frame; returns `frames × num_filters`.
pub fn log_mel(spec: &Spectrogram, fb: &MelFilterbank, floor: f64) -> Result<Vec<f64>> {
    if spec.bins != fb.bins() {
        return Err(Error::shape(format!(
            "spectrogram has {} bins, filterbank expects {}",
            spec.bins,
            fb.bins()
        )));
    }
    let mut out = Vec::with_capacity(spec.num_frames() * fb.num_filters);
    let mut power = vec![0.0; spec.bins];
    for i in 0..spec.num_frames() {
        for (p, c) in power.iter_mut().zip(spec.row(i)) {
            *p = c.norm_sqr();
        }
        for j in 0..fb.num_filters {
            let e = crate::linalg::dot(fb.row(j), &power);
            out.push(e.max(floor).ln());
        }
    }
    Ok(out)
}
