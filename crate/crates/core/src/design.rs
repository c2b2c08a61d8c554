//! Feasibility checks for an apparatus: fringe sampling by the mirror
//! footprint, misdetection clearance, and the mirror width that satisfies
//! both.

use std::f64::consts::FRAC_PI_4;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{clearance_angles_with, detector_layout, detector_separation, mirror_placement, Apparatus, Slit};
use crate::wavemodel::fringe_spacing;
use crate::{Error, Result};

/// Bracket for the limiting half-width search, meters.
pub const HALF_WIDTH_BRACKET: (f64, f64) = (1e-6, 2e-3);
/// Bisection stops once the bracket is narrower than this, meters.
pub const HALF_WIDTH_TOL: f64 = 1e-10;
/// Scan positions used by the footprint and misdetection sweeps.
const SWEEP_POINTS: usize = 65;

/// Divisor in `w' = F_s / 7`.
pub const MIRROR_WIDTH_DIVISOR: f64 = 7.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    #[serde(rename = "F_s_m")]
    pub fringe_spacing: f64,
    #[serde(rename = "w_prime_m")]
    pub w_prime: f64,
    /// `None` when the clearance never binds inside the search bracket.
    #[serde(rename = "w1_limit_m")]
    pub w1_limit: Option<f64>,
    #[serde(rename = "w2_limit_m")]
    pub w2_limit: Option<f64>,
    #[serde(rename = "required_w_m")]
    pub required_w: f64,
    #[serde(rename = "mirror_width_m")]
    pub mirror_width: f64,
    #[serde(rename = "L12_m")]
    pub l12: f64,
    #[serde(rename = "L12_approx_m")]
    pub l12_approx: f64,
    #[serde(rename = "max_projection_m")]
    pub max_projection: f64,
    pub sampling_ok: bool,
    pub misdetection_free: bool,
    pub diaphragm_clear: bool,
    pub warnings: Vec<String>,
}

impl DesignReport {
    pub fn passes(&self) -> bool {
        self.sampling_ok && self.misdetection_free && self.diaphragm_clear
    }
}

/// `(w', theta)` for an apparatus: a mirror a seventh of a fringe wide at 45°.
pub fn default_mirror_params(app: &Apparatus) -> (f64, f64) {
    (fringe_spacing(app) / MIRROR_WIDTH_DIVISOR, FRAC_PI_4)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplingCheck {
    pub ok: bool,
    pub max_projection: f64,
}

/// Length of the mirror's shadow on the screen line, projecting `M1` along
/// `S1 -> M1` and `M2` along `S2 -> M2`.
pub fn mirror_footprint(app: &Apparatus, x: f64) -> f64 {
    let m = mirror_placement(app, x);
    let l = app.screen_distance;
    let project = |slit: nalgebra::Point2<f64>, end: nalgebra::Point2<f64>| {
        let dir = end - slit;
        end.x + (l - end.y) * dir.x / dir.y
    };
    (project(app.slit1(), m.end1) - project(app.slit2(), m.end2)).abs()
}

/// Footprint must stay under `F_s / 2` for every `0 <= x <= x0`.
pub fn sampling_constraint(app: &Apparatus, x0: f64) -> Result<SamplingCheck> {
    let f_s = fringe_spacing(app);
    if !(x0 > 2.0 * f_s) {
        return Err(Error::ScanExtentTooSmall { x0, limit: 2.0 * f_s });
    }
    let max_projection = (0..=200).map(|i| mirror_footprint(app, x0 * i as f64 / 200.0)).fold(0.0, f64::max);
    Ok(SamplingCheck { ok: max_projection < f_s / 2.0, max_projection })
}

/// Clearance margin (positive when clear) for a photon from `slit`
/// reflecting at half-width `h` on that slit's limiting side of the mirror.
fn clearance_margin(app: &Apparatus, x: f64, slit: Slit) -> Result<impl Fn(f64) -> f64 + '_> {
    let placement = mirror_placement(app, x);
    let layout = detector_layout(app, x)?;
    Ok(move |h: f64| match slit {
        Slit::One => clearance_angles_with(app, &placement, &layout, placement.point_at(h)).0,
        Slit::Two => -clearance_angles_with(app, &placement, &layout, placement.point_at(-h)).1,
    })
}

/// Largest half-width for which photons from `slit` reflecting at the
/// mirror end on that slit's side still clear the other detector.
pub fn limiting_half_width(app: &Apparatus, x: f64, slit: Slit) -> Result<f64> {
    let margin = clearance_margin(app, x, slit)?;
    let (mut lo, mut hi) = HALF_WIDTH_BRACKET;
    if margin(lo) <= 0.0 {
        return Err(Error::ClearanceViolated { lo });
    }
    if margin(hi) > 0.0 {
        return Err(Error::NoBracket { lo, hi });
    }
    while hi - lo > HALF_WIDTH_TOL {
        let mid = 0.5 * (lo + hi);
        if margin(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `(w1, w2)`: slit 1 probed at `M1` with `x = 3 F_s`, slit 2 at `M2` with
/// `x = 0`.
pub fn limiting_half_widths(app: &Apparatus) -> (Result<f64>, Result<f64>) {
    let x_far = 3.0 * fringe_spacing(app);
    (limiting_half_width(app, x_far, Slit::One), limiting_half_width(app, 0.0, Slit::Two))
}

/// `2 min(w'/2, w1, w2)`; an unbounded limit drops out.
pub fn mirror_width_rule(w_prime: f64, w1: Option<f64>, w2: Option<f64>) -> f64 {
    2.0 * [Some(w_prime / 2.0), w1, w2].into_iter().flatten().fold(f64::INFINITY, f64::min)
}

fn bound(limit: Result<f64>) -> Result<Option<f64>> {
    match limit {
        Ok(w) => Ok(Some(w)),
        Err(Error::NoBracket { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

pub fn required_mirror_width(app: &Apparatus) -> Result<f64> {
    let (w_prime, _) = default_mirror_params(app);
    let (w1, w2) = limiting_half_widths(app);
    Ok(mirror_width_rule(w_prime, bound(w1)?, bound(w2)?))
}

/// Runs every design check on `app` over scan positions `0 <= x <= x_max`.
pub fn validate(app: &Apparatus, x_max: f64) -> Result<DesignReport> {
    let mut warnings = app.check()?;
    let f_s = fringe_spacing(app);
    let (w_prime, _) = default_mirror_params(app);

    let (sampling_ok, max_projection) = match sampling_constraint(app, x_max) {
        Ok(c) => (c.ok, c.max_projection),
        Err(e) => {
            warnings.push(e.to_string());
            (false, mirror_footprint(app, x_max.max(0.0)))
        }
    };
    if !sampling_ok {
        warnings.push(format!("mirror footprint {max_projection:.4e} m is not below F_s/2 = {:.4e} m", f_s / 2.0));
    }

    let (w1, w2) = limiting_half_widths(app);
    let mut limits_ok = true;
    let mut take = |limit: Result<f64>, name: &str| match bound(limit) {
        Ok(w) => w,
        Err(e) => {
            warnings.push(format!("{name}: {e}"));
            limits_ok = false;
            None
        }
    };
    let w1_limit = take(w1, "w1");
    let w2_limit = take(w2, "w2");
    let required_w = if limits_ok { mirror_width_rule(w_prime, w1_limit, w2_limit) } else { 0.0 };
    if app.mirror_width > required_w * (1.0 + 1e-9) {
        warnings.push(format!("mirror width {:.4e} m exceeds the required width {required_w:.4e} m", app.mirror_width));
    }

    let (l12, l12_approx) = match detector_separation(app, 0.0) {
        Ok(s) => (s.exact, s.approx),
        Err(_) => (0.0, 0.0),
    };

    let mut diaphragm_clear = true;
    let mut misdetection_free = true;
    for i in 0..SWEEP_POINTS {
        let x = x_max.max(0.0) * i as f64 / (SWEEP_POINTS - 1) as f64;
        let layout = match detector_layout(app, x) {
            Ok(l) => l,
            Err(e) => {
                warnings.push(e.to_string());
                diaphragm_clear = false;
                misdetection_free = false;
                break;
            }
        };
        let placement = mirror_placement(app, x);
        let clear = [placement.end2, placement.center, placement.end1].into_iter().all(|p| {
            let (d1, d2) = clearance_angles_with(app, &placement, &layout, p);
            d1 > 0.0 && d2 < 0.0
        });
        if !clear {
            warnings.push(format!("misdetection possible with the mirror at x = {x:.4e} m"));
            misdetection_free = false;
            break;
        }
    }

    Ok(DesignReport {
        fringe_spacing: f_s,
        w_prime,
        w1_limit,
        w2_limit,
        required_w,
        mirror_width: app.mirror_width,
        l12,
        l12_approx,
        max_projection,
        sampling_ok,
        misdetection_free,
        diaphragm_clear,
        warnings,
    })
}

/// Closed interval; deserializes from a number (degenerate) or `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "IntervalRepr", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum IntervalRepr {
    Point(f64),
    Range([f64; 2]),
}

impl From<IntervalRepr> for Interval {
    fn from(r: IntervalRepr) -> Self {
        match r {
            IntervalRepr::Point(v) => Interval::point(v),
            IntervalRepr::Range([lo, hi]) => Interval { lo, hi },
        }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    fn at(&self, t: f64) -> f64 {
        self.lo + (self.hi - self.lo) * t
    }

    fn is_point(&self) -> bool {
        self.lo == self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSpace {
    pub wavelength: Interval,
    pub slit_separation: Interval,
    pub screen_distance: Interval,
    pub mirror_angle: Interval,
    /// Common length of both detector arms.
    pub arm_length: Interval,
    pub aperture: Interval,
    #[serde(default = "default_slit_width")]
    pub slit_width: f64,
    /// Scan extent for validation; `None` means `3 F_s` of each candidate.
    #[serde(default)]
    pub x_max: Option<f64>,
}

fn default_slit_width() -> f64 {
    Apparatus::reference_design().slit_width
}

impl SearchSpace {
    pub fn around(app: &Apparatus) -> Self {
        SearchSpace {
            wavelength: Interval::point(app.wavelength),
            slit_separation: Interval::point(app.slit_separation),
            screen_distance: Interval::point(app.screen_distance),
            mirror_angle: Interval::point(app.mirror_angle),
            arm_length: Interval::point(0.5 * (app.arm1 + app.arm2)),
            aperture: Interval::point(app.aperture),
            slit_width: app.slit_width,
            x_max: None,
        }
    }

    fn dims(&self) -> [Interval; 6] {
        [self.wavelength, self.slit_separation, self.screen_distance, self.mirror_angle, self.arm_length, self.aperture]
    }

    pub fn check(&self) -> Result<()> {
        for (name, iv) in ["wavelength", "slit_separation", "screen_distance", "mirror_angle", "arm_length", "aperture"]
            .into_iter()
            .zip(self.dims())
        {
            if !(iv.lo > 0.0 && iv.lo <= iv.hi && iv.hi.is_finite()) {
                return Err(Error::InvalidSearchSpace(format!(
                    "{name}: need 0 < lo <= hi, got [{}, {}]",
                    iv.lo, iv.hi
                )));
            }
        }
        if !(self.slit_width > 0.0) || self.x_max.is_some_and(|x| !(x > 0.0)) {
            return Err(Error::InvalidSearchSpace("slit_width and x_max must be positive".into()));
        }
        Ok(())
    }

    /// Apparatus at unit-cube coordinates `t`; the mirror width is left at
    /// zero for the caller to derive.
    fn candidate(&self, t: [f64; 6]) -> Apparatus {
        let d = self.dims();
        let arm = d[4].at(t[4]);
        Apparatus {
            wavelength: d[0].at(t[0]),
            slit_separation: d[1].at(t[1]),
            slit_width: self.slit_width,
            screen_distance: d[2].at(t[2]),
            mirror_width: 0.0,
            mirror_angle: d[3].at(t[3]),
            arm1: arm,
            arm2: arm,
            aperture: d[5].at(t[5]),
        }
    }

    /// Box corners (collapsed dimensions counted once) followed by the center.
    fn corners(&self) -> Vec<[f64; 6]> {
        let dims = self.dims();
        let mut out = vec![[0.0; 6]];
        for (k, iv) in dims.iter().enumerate() {
            if iv.is_point() {
                continue;
            }
            let mut next = Vec::with_capacity(out.len() * 2);
            for c in &out {
                for v in [0.0, 1.0] {
                    let mut c = *c;
                    c[k] = v;
                    next.push(c);
                }
            }
            out = next;
        }
        if dims.iter().any(|iv| !iv.is_point()) {
            out.push([0.5; 6]);
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: Option<(Apparatus, DesignReport)>,
    pub evaluated: usize,
    pub feasible: usize,
}

/// Builds a complete candidate with the derived mirror width and validates it.
pub fn evaluate_candidate(mut app: Apparatus, x_max: Option<f64>) -> Option<(Apparatus, DesignReport)> {
    app.mirror_width = 1e-9;
    app.check().ok()?;
    app.mirror_width = required_mirror_width(&app).ok()?;
    if !(app.mirror_width > 0.0) {
        return None;
    }
    let extent = x_max.unwrap_or(3.0 * fringe_spacing(&app));
    let report = validate(&app, extent).ok()?;
    report.passes().then_some((app, report))
}

/// Seeded random search maximizing the detector separation over feasible
/// designs. Corners of the box are always evaluated before `samples` random
/// points; ties keep the lowest candidate index.
pub fn design_search(space: &SearchSpace, samples: usize, seed: u64) -> Result<SearchOutcome> {
    space.check()?;
    let mut points = space.corners();
    for i in 0..samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        points.push(std::array::from_fn(|_| rng.random::<f64>()));
    }
    let eval = |t: &[f64; 6]| evaluate_candidate(space.candidate(*t), space.x_max);

    #[cfg(feature = "parallel")]
    let results: Vec<_> = {
        use rayon::prelude::*;
        points.par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<_> = points.iter().map(eval).collect();

    let feasible = results.iter().filter(|r| r.is_some()).count();
    let mut best: Option<(Apparatus, DesignReport)> = None;
    for found in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|(_, b)| found.1.l12 > b.l12) {
            best = Some(found);
        }
    }
    Ok(SearchOutcome { best, evaluated: points.len(), feasible })
}
