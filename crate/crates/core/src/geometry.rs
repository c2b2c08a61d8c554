//! Planar coordinate model of the apparatus.
//!
//! Frame: diaphragm on `y = 0`, screen line on `y = L`, slit 1 at `(+d/2, 0)`
//! and slit 2 at `(-d/2, 0)`. The mirror is centered at `(x, L)` and tilted by
//! `theta` from the screen line so that its `+x` end sits further from the
//! diaphragm; central rays are then folded toward `+x`.
//!
//! Signed angles are counterclockwise and measured from the mirror normal.

use nalgebra::{Unit, Vector2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub type Point2 = nalgebra::Point2<f64>;
pub type Vec2 = Vector2<f64>;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Below this |v·n| a reflection is treated as grazing.
pub const GRAZING_LIMIT: f64 = 1e-9;

/// Physical parameters of the set-up. Lengths in meters, angle in radians.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Apparatus {
    pub wavelength: f64,
    pub slit_separation: f64,
    pub slit_width: f64,
    pub screen_distance: f64,
    pub mirror_width: f64,
    pub mirror_angle: f64,
    pub arm1: f64,
    pub arm2: f64,
    pub aperture: f64,
}

impl Apparatus {
    /// The worked laboratory design: 700 nm light, 100 µm slit pitch, 1 µm
    /// slits, 10 cm to the screen, a 0.1 mm mirror at 45°, 5 m arms and 1 mm
    /// apertures.
    pub fn reference_design() -> Self {
        Apparatus {
            wavelength: 700e-9,
            slit_separation: 100e-6,
            slit_width: 1e-6,
            screen_distance: 0.1,
            mirror_width: 0.1e-3,
            mirror_angle: std::f64::consts::FRAC_PI_4,
            arm1: 5.0,
            arm2: 5.0,
            aperture: 1e-3,
        }
    }

    /// Hard validity check. Returns the regime warnings on success.
    pub fn check(&self) -> Result<Vec<String>> {
        let lengths = [
            ("wavelength", self.wavelength),
            ("slit_separation", self.slit_separation),
            ("slit_width", self.slit_width),
            ("screen_distance", self.screen_distance),
            ("mirror_width", self.mirror_width),
            ("arm1", self.arm1),
            ("arm2", self.arm2),
            ("aperture", self.aperture),
        ];
        for (name, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidApparatus(format!("{name} must be positive, got {v}")));
            }
        }
        let theta = self.mirror_angle;
        if !(theta > 0.0 && theta < std::f64::consts::FRAC_PI_2) {
            return Err(Error::InvalidApparatus(format!("mirror_angle must lie in (0, π/2), got {theta}")));
        }
        Ok(self.regime_warnings())
    }

    pub fn regime_warnings(&self) -> Vec<String> {
        let mut warnings = Vec::new();
        if self.slit_width >= self.slit_separation / 10.0 {
            warnings.push(format!(
                "slit width {:.3e} m is not small against the slit separation {:.3e} m",
                self.slit_width, self.slit_separation
            ));
        }
        if self.slit_separation >= self.screen_distance / 100.0 {
            warnings.push(format!(
                "screen distance {:.3e} m is not large against the slit separation {:.3e} m",
                self.screen_distance, self.slit_separation
            ));
        }
        warnings
    }

    pub fn slit1(&self) -> Point2 {
        Point2::new(self.slit_separation / 2.0, 0.0)
    }

    pub fn slit2(&self) -> Point2 {
        Point2::new(-self.slit_separation / 2.0, 0.0)
    }

    pub fn slit(&self, which: Slit) -> Point2 {
        match which {
            Slit::One => self.slit1(),
            Slit::Two => self.slit2(),
        }
    }

    pub fn arm(&self, which: Slit) -> f64 {
        match which {
            Slit::One => self.arm1,
            Slit::Two => self.arm2,
        }
    }
}

/// Slit (and the detector paired with it).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Slit {
    One,
    Two,
}

impl Slit {
    pub fn other(self) -> Slit {
        match self {
            Slit::One => Slit::Two,
            Slit::Two => Slit::One,
        }
    }

    pub fn index(self) -> u8 {
        match self {
            Slit::One => 1,
            Slit::Two => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray2 {
    pub origin: Point2,
    pub direction: Unit<Vec2>,
}

impl Ray2 {
    pub fn new(origin: Point2, direction: Vec2) -> Self {
        Ray2 { origin, direction: Unit::new_normalize(direction) }
    }

    pub fn through(from: Point2, to: Point2) -> Self {
        Ray2::new(from, to - from)
    }

    pub fn at(&self, t: f64) -> Point2 {
        self.origin + self.direction.into_inner() * t
    }

    /// Parameter `t >= 0` at which the ray crosses the segment `[a, b]`.
    pub fn hit_segment(&self, a: Point2, b: Point2) -> Option<f64> {
        let v = self.direction.into_inner();
        let e = b - a;
        let denom = cross(v, e);
        if denom.abs() < f64::EPSILON * e.norm() {
            return None;
        }
        let w = a - self.origin;
        let t = cross(w, e) / denom;
        let s = cross(w, v) / denom;
        (t >= 0.0 && (0.0..=1.0).contains(&s)).then_some(t)
    }
}

/// Mirror position and orientation for one scan position.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MirrorPlacement {
    pub x: f64,
    pub center: Point2,
    /// Endpoint with the larger `x`.
    pub end1: Point2,
    pub end2: Point2,
    /// Unit vector from `end2` toward `end1`.
    pub along: Unit<Vec2>,
    /// Unit normal facing the diaphragm.
    pub normal: Unit<Vec2>,
}

impl MirrorPlacement {
    pub fn half_width(&self) -> f64 {
        (self.end1 - self.center).norm()
    }

    /// Point at signed offset `s` from the center along the mirror line.
    pub fn point_at(&self, s: f64) -> Point2 {
        self.center + self.along.into_inner() * s
    }

    /// Signed offset of `p` along the mirror, or an error if `p` is off the
    /// mirror segment.
    pub fn offset_of(&self, p: Point2) -> Result<f64> {
        let rel = p - self.center;
        let s = rel.dot(&self.along);
        let off_line = rel.dot(&self.normal).abs();
        let half = self.half_width();
        let tol = 1e-9 * half.max(self.center.coords.norm());
        if off_line > tol || s.abs() > half + tol {
            return Err(Error::OffMirror { x: p.x, y: p.y });
        }
        Ok(s)
    }
}

/// Detector aperture centers and edges for one reference placement.
///
/// Edge labels are taken looking along the arriving central ray; `d1_left`
/// and `d2_right` are the edges facing the other detector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorLayout {
    pub x_ref: f64,
    pub d1: Point2,
    pub d2: Point2,
    pub d1_left: Point2,
    pub d1_right: Point2,
    pub d2_left: Point2,
    pub d2_right: Point2,
    pub arm1: f64,
    pub arm2: f64,
}

impl DetectorLayout {
    pub fn aperture(&self, which: Slit) -> (Point2, Point2) {
        match which {
            Slit::One => (self.d1_left, self.d1_right),
            Slit::Two => (self.d2_left, self.d2_right),
        }
    }

    pub fn center(&self, which: Slit) -> Point2 {
        match which {
            Slit::One => self.d1,
            Slit::Two => self.d2,
        }
    }
}

fn cross(a: Vec2, b: Vec2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Counterclockwise angle from `from` to `to`, in (-π, π].
pub fn signed_angle(from: &Vec2, to: &Vec2) -> f64 {
    cross(*from, *to).atan2(from.dot(to))
}

pub fn path_lengths(app: &Apparatus, x: f64) -> (f64, f64) {
    let half = app.slit_separation / 2.0;
    let l = app.screen_distance;
    ((x - half).hypot(l), (x + half).hypot(l))
}

pub fn arrival_times(app: &Apparatus, x: f64) -> (f64, f64) {
    let (d1, d2) = path_lengths(app, x);
    ((d1 + app.arm1) / SPEED_OF_LIGHT, (d2 + app.arm2) / SPEED_OF_LIGHT)
}

pub fn mirror_placement(app: &Apparatus, x: f64) -> MirrorPlacement {
    let (sin, cos) = app.mirror_angle.sin_cos();
    let along = Unit::new_unchecked(Vec2::new(cos, sin));
    let normal = Unit::new_unchecked(Vec2::new(sin, -cos));
    let center = Point2::new(x, app.screen_distance);
    let half = app.mirror_width / 2.0;
    MirrorPlacement {
        x,
        center,
        end1: center + along.into_inner() * half,
        end2: center - along.into_inner() * half,
        along,
        normal,
    }
}

/// Specular reflection of `incident` at `at` about `normal`.
pub fn reflect(incident: &Ray2, at: Point2, normal: &Unit<Vec2>) -> Result<Ray2> {
    let v = incident.direction.into_inner();
    let n = normal.into_inner();
    let dot = v.dot(&n);
    if dot.abs() < GRAZING_LIMIT {
        return Err(Error::GrazingIncidence { dot });
    }
    Ok(Ray2::new(at, v - n * (2.0 * dot)))
}

/// Signed angles at the mirror center from the normal to each slit.
pub fn incidence_angles(app: &Apparatus, x: f64) -> (f64, f64) {
    let m = mirror_placement(app, x);
    let n = m.normal.into_inner();
    (signed_angle(&n, &(app.slit1() - m.center)), signed_angle(&n, &(app.slit2() - m.center)))
}

/// Places each detector `L_i` along the reflected central ray from slit `i`.
pub fn detector_layout(app: &Apparatus, x_ref: f64) -> Result<DetectorLayout> {
    let m = mirror_placement(app, x_ref);
    let mut centers = [Point2::origin(); 2];
    let mut edges = [(Point2::origin(), Point2::origin()); 2];
    for (k, slit) in [Slit::One, Slit::Two].into_iter().enumerate() {
        let incident = Ray2::through(app.slit(slit), m.center);
        let out = reflect(&incident, m.center, &m.normal)?;
        let r = out.direction.into_inner();
        if r.y < 0.0 {
            let x_hit = m.center.x - m.center.y * r.x / r.y;
            if x_hit.abs() < 10.0 * app.slit_separation {
                return Err(Error::DiaphragmClearance { slit: slit.index(), x_hit });
            }
        }
        let center = out.at(app.arm(slit));
        let left = Vec2::new(-r.y, r.x) * (app.aperture / 2.0);
        centers[k] = center;
        edges[k] = (center + left, center - left);
    }
    Ok(DetectorLayout {
        x_ref,
        d1: centers[0],
        d2: centers[1],
        d1_left: edges[0].0,
        d1_right: edges[0].1,
        d2_left: edges[1].0,
        d2_right: edges[1].1,
        arm1: app.arm1,
        arm2: app.arm2,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DetectorSeparation {
    /// `|D1 - D2|` from the exact layout.
    pub exact: f64,
    /// `L0 (gamma1 - gamma2)` with `L0` the mean arm length.
    pub approx: f64,
}

pub fn detector_separation(app: &Apparatus, x: f64) -> Result<DetectorSeparation> {
    let layout = detector_layout(app, x)?;
    let (g1, g2) = incidence_angles(app, x);
    let arm = 0.5 * (app.arm1 + app.arm2);
    Ok(DetectorSeparation { exact: (layout.d1 - layout.d2).norm(), approx: arm * (g1 - g2) })
}

/// Clearance angles `(delta1, delta2)` at mirror point `p`, with the detector
/// layout re-derived at the same `x`.
pub fn clearance_angles(app: &Apparatus, x: f64, p: Point2) -> Result<(f64, f64)> {
    let placement = mirror_placement(app, x);
    placement.offset_of(p)?;
    let layout = detector_layout(app, x)?;
    Ok(clearance_angles_with(app, &placement, &layout, p))
}

/// Clearance angles against an explicit layout; `p` is taken on the mirror
/// line without a bounds check.
///
/// `delta = angle(N, p->S) + angle(N, p->E)` where `E` is the facing aperture
/// edge of the other slit's detector. It vanishes exactly when the specular
/// image of the ray from `S` through `p` passes through `E`. A photon from
/// slit 1 clears D2 while `delta1 > 0`; one from slit 2 clears D1 while
/// `delta2 < 0`.
pub fn clearance_angles_with(
    app: &Apparatus,
    placement: &MirrorPlacement,
    layout: &DetectorLayout,
    p: Point2,
) -> (f64, f64) {
    let n = placement.normal.into_inner();
    let delta1 = signed_angle(&n, &(app.slit1() - p)) + signed_angle(&n, &(layout.d2_right - p));
    let delta2 = signed_angle(&n, &(app.slit2() - p)) + signed_angle(&n, &(layout.d1_left - p));
    (delta1, delta2)
}

/// Reflects the ray from `slit` through `p` and reports which aperture, if
/// any, it crosses.
pub fn detect(
    app: &Apparatus,
    placement: &MirrorPlacement,
    layout: &DetectorLayout,
    slit: Slit,
    p: Point2,
) -> Result<Option<Slit>> {
    let out = reflect(&Ray2::through(app.slit(slit), p), p, &placement.normal)?;
    let mut best: Option<(f64, Slit)> = None;
    for det in [Slit::One, Slit::Two] {
        let (a, b) = layout.aperture(det);
        if let Some(t) = out.hit_segment(a, b) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, det));
            }
        }
    }
    Ok(best.map(|(_, det)| det))
}
