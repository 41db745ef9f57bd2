//! Reductions of gain spectra used by sweeps and reports.

use super::sideband::GainSpectrum;

/// Signal band around the pump with the resonator neighbourhood cut out.
///
/// The resonator suppresses the signal at `f_r` and, through the idler,
/// at the image `2 f_p - f_r`. Everything between the two, widened by
/// `dip_guard` on each side, is excluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainBand {
    pub f_p: f64,
    pub half_width: f64,
    pub f_r: Option<f64>,
    pub dip_guard: f64,
}

impl GainBand {
    pub const DEFAULT_HALF_WIDTH: f64 = 1e9;
    pub const DEFAULT_DIP_GUARD: f64 = 100e6;

    pub fn new(f_p: f64, f_r: Option<f64>) -> Self {
        Self {
            f_p,
            half_width: Self::DEFAULT_HALF_WIDTH,
            f_r,
            dip_guard: Self::DEFAULT_DIP_GUARD,
        }
    }

    pub fn image(&self) -> Option<f64> {
        self.f_r.map(|f| 2.0 * self.f_p - f)
    }

    pub fn contains(&self, f: f64) -> bool {
        if (f - self.f_p).abs() > self.half_width {
            return false;
        }
        match (self.f_r, self.image()) {
            (Some(a), Some(b)) => f < a.min(b) - self.dip_guard || f > a.max(b) + self.dip_guard,
            _ => true,
        }
    }
}

/// Indices of `spectrum` inside `band`.
pub fn band_frequencies(spectrum: &GainSpectrum, band: &GainBand) -> Vec<usize> {
    spectrum
        .grid
        .iter()
        .enumerate()
        .filter(|&(_, f)| band.contains(f))
        .map(|(i, _)| i)
        .collect()
}

/// Mean `gain_db` over the band; `None` when no point falls inside.
pub fn band_average_gain(spectrum: &GainSpectrum, band: &GainBand) -> Option<f64> {
    let idx = band_frequencies(spectrum, band);
    if idx.is_empty() {
        return None;
    }
    Some(idx.iter().map(|&i| spectrum.gain_db[i]).sum::<f64>() / idx.len() as f64)
}

/// Frequency of the gain minimum within `window` of the idler image of the
/// resonator, `2 f_p - f_r`.
pub fn image_dip_frequency(spectrum: &GainSpectrum, band: &GainBand, window: f64) -> Option<f64> {
    let image = band.image()?;
    spectrum
        .grid
        .iter()
        .zip(&spectrum.gain_db)
        .filter(|(f, _)| (f - image).abs() <= window)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(f, _)| f)
}
