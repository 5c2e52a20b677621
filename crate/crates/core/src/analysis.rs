//! Spectra, series comparison and decay fits on population traces.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::model::TransitionStick;
use crate::units::angular_frequency;
use crate::{Error, Result};

/// Evenly spaced wavenumber grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumGrid {
    pub nu_min: f64,
    pub nu_max: f64,
    pub n_points: usize,
}

impl SpectrumGrid {
    pub fn new(nu_min: f64, nu_max: f64, n_points: usize) -> Result<Self> {
        let g = Self {
            nu_min,
            nu_max,
            n_points,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu_min.is_finite() && self.nu_max.is_finite() && self.nu_max > self.nu_min) {
            return invalid(format!(
                "spectrum grid needs finite nu_min < nu_max, got {}..{}",
                self.nu_min, self.nu_max
            ));
        }
        if self.n_points < 2 {
            return invalid("spectrum grid needs at least two points");
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        (self.nu_max - self.nu_min) / (self.n_points - 1) as f64
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        let h = self.spacing();
        (0..self.n_points)
            .map(|i| {
                if i + 1 == self.n_points {
                    self.nu_max
                } else {
                    self.nu_min + i as f64 * h
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    pub wavenumbers: Vec<f64>,
    /// Normalized to a unit maximum over the grid, or all zero.
    pub amplitudes: Vec<f64>,
    /// Largest unnormalized amplitude (population·ps).
    pub raw_max: f64,
    pub sticks: Vec<TransitionStick>,
    /// Plotting factor for the amplitudes. Never applied to the stored values.
    pub display_scale: f64,
}

impl Spectrum {
    pub fn with_sticks(mut self, sticks: Vec<TransitionStick>) -> Self {
        self.sticks = sticks;
        self
    }

    /// Grid index of the global maximum; the first one wins on ties.
    pub fn peak_index(&self) -> Option<usize> {
        if self.raw_max == 0.0 {
            return None;
        }
        let mut best = 0;
        for (i, &a) in self.amplitudes.iter().enumerate() {
            if a > self.amplitudes[best] {
                best = i;
            }
        }
        Some(best)
    }

    pub fn peak(&self) -> Option<(f64, f64)> {
        self.peak_index()
            .map(|i| (self.wavenumbers[i], self.amplitudes[i]))
    }

    /// Interior local maxima `(ν̃, amplitude)` with `lo ≤ ν̃ ≤ hi`.
    pub fn local_maxima(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        let a = &self.amplitudes;
        (1..a.len().saturating_sub(1))
            .filter(|&i| a[i] > a[i - 1] && a[i] >= a[i + 1])
            .map(|i| (self.wavenumbers[i], a[i]))
            .filter(|&(nu, _)| nu >= lo && nu <= hi)
            .collect()
    }

    /// Full width at half maximum of the peak at grid index `i`, with linear
    /// interpolation of the crossings. `None` if a side never drops below half.
    pub fn fwhm_at(&self, i: usize) -> Option<f64> {
        let a = &self.amplitudes;
        let half = a[i] / 2.0;
        let nu = &self.wavenumbers;
        let cross = |j: usize, k: usize| nu[j] + (half - a[j]) / (a[k] - a[j]) * (nu[k] - nu[j]);
        let left = (0..i)
            .rev()
            .find(|&j| a[j] < half)
            .map(|j| cross(j, j + 1))?;
        let right = (i + 1..a.len())
            .find(|&j| a[j] < half)
            .map(|j| cross(j - 1, j))?;
        Some(right - left)
    }

    /// Header `wavenumber_cm1,amplitude`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "wavenumber_cm1,amplitude")?;
        for (nu, a) in self.wavenumbers.iter().zip(&self.amplitudes) {
            writeln!(w, "{nu:.16e},{a:.16e}")?;
        }
        Ok(())
    }

    /// Header `delta_e_cm1,alpha_abs`.
    pub fn write_sticks_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "delta_e_cm1,alpha_abs")?;
        for s in &self.sticks {
            writeln!(w, "{:.16e},{:.16e}", s.delta_e_cm1, s.alpha_abs)?;
        }
        Ok(())
    }
}

fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return invalid(format!("need at least two samples, got {}", times.len()));
    }
    let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if dt.is_nan() || dt <= 0.0 {
        return invalid("time grid must be strictly increasing");
    }
    for (j, w) in times.windows(2).enumerate() {
        if ((w[1] - w[0]) - dt).abs() > 1e-6 * dt {
            return invalid(format!("time grid is not uniform at sample {}", j + 1));
        }
    }
    Ok(dt)
}

/// `|Σ_j x_j·exp(i·2πc·ν̃·t_j)|·Δt` on every grid point, rectangular window,
/// normalized to unit maximum.
pub fn dft_spectrum(
    times: &[f64],
    values: &[f64],
    grid: &SpectrumGrid,
    detrend: bool,
) -> Result<Spectrum> {
    if times.len() != values.len() {
        return invalid(format!("{} times but {} values", times.len(), values.len()));
    }
    grid.validate()?;
    let dt = uniform_step(times)?;
    let mean = if detrend {
        values.iter().sum::<f64>() / values.len() as f64
    } else {
        0.0
    };
    let x: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let wavenumbers = grid.wavenumbers();
    let raw: Vec<f64> = wavenumbers
        .iter()
        .map(|&nu| {
            let w = angular_frequency(nu);
            let s: Complex64 = times
                .iter()
                .zip(&x)
                .map(|(&t, &v)| Complex64::from_polar(v, w * t))
                .sum();
            s.norm() * dt
        })
        .collect();
    let raw_max = raw.iter().copied().fold(0.0, f64::max);
    // a flat input leaves only rounding noise after detrending
    let magnitude = values.iter().map(|v| v.abs()).sum::<f64>() * dt;
    let (amplitudes, raw_max) = if raw_max > 1e-12 * magnitude {
        (raw.iter().map(|a| a / raw_max).collect(), raw_max)
    } else {
        (vec![0.0; raw.len()], 0.0)
    };
    Ok(Spectrum {
        wavenumbers,
        amplitudes,
        raw_max,
        sticks: Vec::new(),
        display_scale: 1.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub max_abs_dev: f64,
    pub rms_dev: f64,
}

pub fn compare_series(a: &[f64], b: &[f64]) -> Result<Comparison> {
    if a.len() != b.len() {
        return invalid(format!("series lengths differ: {} vs {}", a.len(), b.len()));
    }
    if a.is_empty() {
        return invalid("cannot compare empty series");
    }
    let (mut max, mut sq) = (0.0f64, 0.0);
    for (x, y) in a.iter().zip(b) {
        let d = (x - y).abs();
        max = max.max(d);
        sq += d * d;
    }
    Ok(Comparison {
        max_abs_dev: max,
        rms_dev: (sq / a.len() as f64).sqrt(),
    })
}

/// Decay time τ (same unit as `times`) from a noisy trace and its noiseless
/// counterpart.
///
/// With `uniform_dim = Some(D)` the mixed floor is removed through
/// `p − 1/D = F·(p₀ − 1/D)`; with `None` the model is `p = F·p₀`. `ln F` is
/// then fitted to `−t/τ` by least squares through the origin, using samples
/// where the reference is at least 0.05 away from the floor.
pub fn fit_decay(
    times: &[f64],
    values: &[f64],
    reference: &[f64],
    uniform_dim: Option<usize>,
) -> Result<f64> {
    if times.len() != values.len() || times.len() != reference.len() {
        return invalid("times, values and reference must have equal lengths");
    }
    if times.len() < 10 {
        return invalid(format!("need at least 10 samples, got {}", times.len()));
    }
    let floor = match uniform_dim {
        Some(0) => return invalid("uniform dimension must be positive"),
        Some(d) => 1.0 / d as f64,
        None => 0.0,
    };
    let (mut num, mut den, mut used) = (0.0, 0.0, 0usize);
    for ((&t, &p), &r) in times.iter().zip(values).zip(reference) {
        let signal = r - floor;
        if signal.abs() < 0.05 {
            continue;
        }
        let f = (p - floor) / signal;
        if f.is_nan() || f <= 1e-8 {
            continue;
        }
        num += t * f.ln();
        den += t * t;
        used += 1;
    }
    if used < 2 || den == 0.0 {
        return Err(Error::DegenerateFit(
            "reference trace is too close to the uniform floor to fit a decay".into(),
        ));
    }
    let slope = num / den;
    if slope.is_nan() || slope >= 0.0 {
        return Err(Error::DegenerateFit(format!(
            "no decay in the trace (slope {slope:e})"
        )));
    }
    Ok(-1.0 / slope)
}
