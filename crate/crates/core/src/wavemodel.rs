//! Two-beam scalar intensities, fringe contrast and the duality bound.
//!
//! Intensities keep the unnormalized convention of unit amplitudes per beam,
//! so they range over `[0, 4]`.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{incidence_angles, path_lengths, Apparatus, Slit};
use crate::montecarlo::OutcomeHypothesis;
use crate::{Error, Result};

/// Slack allowed on `D² + V² <= 1` before it counts as violated.
pub const DUALITY_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveParams {
    pub wave_number: f64,
    pub amplitude: f64,
}

impl WaveParams {
    pub fn of(app: &Apparatus) -> Self {
        WaveParams { wave_number: TAU / app.wavelength, amplitude: 1.0 }
    }
}

pub fn fringe_spacing(app: &Apparatus) -> f64 {
    app.wavelength * app.screen_distance / app.slit_separation
}

/// Phase `k (d1 - d2)` of the direct two-beam pattern at `x`.
pub fn path_phase(app: &Apparatus, x: f64) -> f64 {
    let (d1, d2) = path_lengths(app, x);
    WaveParams::of(app).wave_number * (d1 - d2)
}

/// Extra phase `2 (gamma1 - gamma2)` picked up on reflection at the mirror.
pub fn reflection_phase(app: &Apparatus, x: f64) -> f64 {
    let (g1, g2) = incidence_angles(app, x);
    2.0 * (g1 - g2)
}

pub fn screen_intensity(app: &Apparatus, x: f64) -> f64 {
    2.0 * (1.0 + path_phase(app, x).cos())
}

pub fn detector_intensity(app: &Apparatus, x: f64, which: Slit) -> f64 {
    let phase = path_phase(app, x) + reflection_phase(app, x);
    match which {
        Slit::One => 2.0 * (1.0 + phase.cos()),
        Slit::Two => 2.0 * (1.0 + (-phase).cos()),
    }
}

/// Samples `(x, intensity)` with strictly increasing `x`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FringePattern {
    samples: Vec<(f64, f64)>,
}

impl FringePattern {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        for w in samples.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::MalformedPattern(format!("x not strictly increasing at {:.6e}", w[1].0)));
            }
        }
        if let Some(&(x, v)) = samples.iter().find(|(x, v)| !x.is_finite() || !(*v >= 0.0)) {
            return Err(Error::MalformedPattern(format!("bad sample ({x}, {v})")));
        }
        Ok(FringePattern { samples })
    }

    pub fn from_fn(xs: &[f64], f: impl Fn(f64) -> f64) -> Result<Self> {
        FringePattern::new(xs.iter().map(|&x| (x, f(x))).collect())
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.0)
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.1)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Contrast `(I_max - I_min) / (I_max + I_min)` from the sample extrema.
pub fn visibility(pattern: &FringePattern) -> Result<f64> {
    if pattern.is_empty() {
        return Err(Error::EmptyPattern);
    }
    let (lo, hi) = pattern.values().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi + lo == 0.0 {
        return Ok(0.0);
    }
    Ok((hi - lo) / (hi + lo))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilityFit {
    pub visibility: f64,
    pub phase: f64,
    pub baseline: f64,
    /// RMS residual divided by the baseline.
    pub rms_residual: f64,
}

/// Least-squares fit of `A (1 + V cos(2πx/F + φ))` with the period fixed.
///
/// Linear in `(A, A V cos φ, -A V sin φ)`, so it is solved directly from
/// the normal equations.
pub fn fit_visibility(pattern: &FringePattern, period: f64) -> Result<VisibilityFit> {
    let n = pattern.len();
    if n < 8 {
        return Err(Error::InsufficientSamples(format!("{n} samples, need at least 8")));
    }
    let xs: Vec<f64> = pattern.xs().collect();
    let span = xs[n - 1] - xs[0];
    if span < 2.0 * period {
        return Err(Error::InsufficientSamples(format!(
            "span {span:.4e} m covers fewer than two periods of {period:.4e} m"
        )));
    }
    let max_step = xs.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if max_step >= period / 2.0 {
        return Err(Error::InsufficientSamples(format!(
            "step {max_step:.4e} m is not below half the period {period:.4e} m"
        )));
    }

    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for &(x, y) in pattern.samples() {
        let arg = TAU * x / period;
        let row = Vector3::new(1.0, arg.cos(), arg.sin());
        ata += row * row.transpose();
        aty += row * y;
    }
    let coef = ata
        .cholesky()
        .map(|c| c.solve(&aty))
        .ok_or_else(|| Error::InsufficientSamples("singular normal equations".into()))?;
    let baseline = coef[0];
    if !(baseline > 0.0) {
        return Err(Error::DegenerateFit { baseline });
    }
    let amplitude = coef[1].hypot(coef[2]);
    let phase = (-coef[2]).atan2(coef[1]);
    let sq: f64 = pattern
        .samples()
        .iter()
        .map(|&(x, y)| {
            let arg = TAU * x / period;
            let model = coef[0] + coef[1] * arg.cos() + coef[2] * arg.sin();
            (y - model).powi(2)
        })
        .sum();
    Ok(VisibilityFit {
        visibility: (amplitude / baseline).clamp(0.0, 1.0),
        phase,
        baseline,
        rms_residual: (sq / n as f64).sqrt() / baseline,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityPoint {
    pub distinguishability: f64,
    pub visibility: f64,
}

impl DualityPoint {
    pub fn new(distinguishability: f64, visibility: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&distinguishability) {
            return Err(Error::Distinguishability(distinguishability));
        }
        if !(0.0..=1.0).contains(&visibility) {
            return Err(Error::InvalidScan(format!("visibility {visibility} outside [0, 1]")));
        }
        Ok(DualityPoint { distinguishability, visibility })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualityCheck {
    pub satisfied: bool,
    pub slack: f64,
}

pub fn duality_check(p: DualityPoint) -> DualityCheck {
    duality_check_within(p, DUALITY_EPS)
}

pub fn duality_check_within(p: DualityPoint, tol: f64) -> DualityCheck {
    let slack = 1.0 - p.distinguishability.powi(2) - p.visibility.powi(2);
    DualityCheck { satisfied: slack >= -tol, slack }
}

/// Fringe visibility implied by an outcome hypothesis; partial duality sits
/// on the boundary `V = sqrt(1 - D²)`.
pub fn hypothesis_visibility(hyp: &OutcomeHypothesis) -> Result<f64> {
    let d = hyp.distinguishability();
    if !(0.0..=1.0).contains(&d) {
        return Err(Error::Distinguishability(d));
    }
    Ok(match hyp {
        OutcomeHypothesis::FullDuality => 1.0,
        OutcomeHypothesis::Exclusive => 0.0,
        OutcomeHypothesis::Partial { .. } => (1.0 - d * d).sqrt(),
    })
}
