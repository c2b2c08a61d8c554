//! Seeded single-photon simulation of a mirror scan.
//!
//! Every scan position draws from its own ChaCha8 stream keyed by
//! `(seed, position index)`, so results do not depend on evaluation order.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::design;
use crate::geometry::{detect, detector_layout, mirror_placement, Apparatus, DetectorLayout, MirrorPlacement, Slit};
use crate::wavemodel::{
    detector_intensity, fit_visibility, fringe_spacing, hypothesis_visibility, path_phase, reflection_phase,
    screen_intensity, FringePattern,
};
use crate::{Error, Result};

/// Stream ids at or above this belong to the mirror-free reference scan.
const CONVENTIONAL_STREAM: u64 = 1 << 40;

/// Anticipated experimental outcome.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum OutcomeHypothesis {
    /// Full path knowledge together with full-contrast fringes.
    FullDuality,
    /// Path knowledge and fringes are mutually exclusive.
    Exclusive,
    /// Imperfect duality on the boundary `D² + V² = 1`.
    Partial { distinguishability: f64 },
}

impl OutcomeHypothesis {
    pub fn partial(distinguishability: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&distinguishability) {
            return Err(Error::Distinguishability(distinguishability));
        }
        Ok(OutcomeHypothesis::Partial { distinguishability })
    }

    pub fn distinguishability(&self) -> f64 {
        match *self {
            OutcomeHypothesis::FullDuality => 0.0,
            OutcomeHypothesis::Exclusive => 1.0,
            OutcomeHypothesis::Partial { distinguishability } => distinguishability,
        }
    }
}

impl fmt::Display for OutcomeHypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutcomeHypothesis::FullDuality => f.write_str("full"),
            OutcomeHypothesis::Exclusive => f.write_str("exclusive"),
            OutcomeHypothesis::Partial { distinguishability } => write!(f, "partial:{distinguishability}"),
        }
    }
}

impl FromStr for OutcomeHypothesis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "full" => Ok(OutcomeHypothesis::FullDuality),
            "exclusive" => Ok(OutcomeHypothesis::Exclusive),
            other => {
                let d = other
                    .strip_prefix("partial:")
                    .and_then(|d| d.parse::<f64>().ok())
                    .ok_or_else(|| Error::ParseHypothesis(s.to_string()))?;
                OutcomeHypothesis::partial(d)
            }
        }
    }
}

impl TryFrom<String> for OutcomeHypothesis {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<OutcomeHypothesis> for String {
    fn from(h: OutcomeHypothesis) -> String {
        h.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub x_positions: Vec<f64>,
    pub photons_per_position: u64,
    pub seed: u64,
    #[serde(default)]
    pub freeze_detectors: bool,
}

impl ScanConfig {
    /// `points` evenly spaced positions over `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64, points: usize, photons_per_position: u64, seed: u64) -> Self {
        let step = if points > 1 { (hi - lo) / (points - 1) as f64 } else { 0.0 };
        ScanConfig {
            x_positions: (0..points).map(|i| lo + step * i as f64).collect(),
            photons_per_position,
            seed,
            freeze_detectors: false,
        }
    }

    /// Grid checks against the fringe spacing: strictly increasing, steps
    /// below `F_s / 2`, at least 8 positions spanning two periods.
    pub fn check(&self, fringe_spacing: f64) -> Result<()> {
        let xs = &self.x_positions;
        if self.photons_per_position == 0 {
            return Err(Error::InvalidScan("photons_per_position must be at least 1".into()));
        }
        if xs.len() < 8 {
            return Err(Error::InvalidScan(format!("{} positions, need at least 8", xs.len())));
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidScan("non-finite scan position".into()));
        }
        for w in xs.windows(2) {
            let step = w[1] - w[0];
            if !(step > 0.0) {
                return Err(Error::InvalidScan(format!("positions not strictly increasing at {:.6e}", w[1])));
            }
            if step >= fringe_spacing / 2.0 {
                return Err(Error::InvalidScan(format!(
                    "step {step:.4e} m violates sampling: must be below F_s/2 = {:.4e} m",
                    fringe_spacing / 2.0
                )));
            }
        }
        if xs[xs.len() - 1] - xs[0] < 2.0 * fringe_spacing {
            return Err(Error::InvalidScan("scan must span at least two fringe periods".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PhotonEvent {
    pub slit: Slit,
    pub detector: Option<Slit>,
    pub misdetected: bool,
}

/// Precomputed state for emitting photons with the mirror at one position.
#[derive(Clone, Debug)]
pub struct PhotonSource<'a> {
    app: &'a Apparatus,
    placement: MirrorPlacement,
    layout: DetectorLayout,
    acceptance: f64,
}

impl<'a> PhotonSource<'a> {
    pub fn new(app: &'a Apparatus, x: f64, hyp: &OutcomeHypothesis, layout: DetectorLayout) -> Result<Self> {
        let v = hypothesis_visibility(hyp)?;
        let phase = path_phase(app, x) + reflection_phase(app, x);
        Ok(PhotonSource { app, placement: mirror_placement(app, x), layout, acceptance: 0.5 * (1.0 + v * phase.cos()) })
    }

    /// Probability that an emitted photon is registered at this position.
    pub fn acceptance(&self) -> f64 {
        self.acceptance
    }

    /// Returns `None` when the photon is rejected by the fringe rate.
    pub fn emit<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<PhotonEvent>> {
        let slit = if rng.random::<bool>() { Slit::One } else { Slit::Two };
        if rng.random::<f64>() >= self.acceptance {
            return Ok(None);
        }
        let half = self.placement.half_width();
        let p = self.placement.point_at(rng.random_range(-half..=half));
        let detector = detect(self.app, &self.placement, &self.layout, slit, p)?;
        Ok(Some(PhotonEvent { slit, detector, misdetected: detector == Some(slit.other()) }))
    }
}

/// One photon with the mirror at `x`; detectors re-derived at `x`.
pub fn photon_event<R: Rng + ?Sized>(
    app: &Apparatus,
    x: f64,
    hyp: &OutcomeHypothesis,
    rng: &mut R,
) -> Result<Option<PhotonEvent>> {
    PhotonSource::new(app, x, hyp, detector_layout(app, x)?)?.emit(rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub x: f64,
    pub n: u64,
    pub n1: u64,
    pub n2: u64,
    pub misdetected: u64,
    pub i1_theory: f64,
    pub i2_theory: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub records: Vec<ScanRecord>,
    pub v_total: f64,
    pub v_1: f64,
    pub v_2: f64,
    pub misdetection_rate: f64,
    pub hypothesis: OutcomeHypothesis,
    pub warnings: Vec<String>,
}

impl ScanSummary {
    pub fn total_pattern(&self) -> Result<FringePattern> {
        FringePattern::new(self.records.iter().map(|r| (r.x, r.n as f64)).collect())
    }

    pub fn detector_pattern(&self, which: Slit) -> Result<FringePattern> {
        FringePattern::new(
            self.records.iter().map(|r| (r.x, if which == Slit::One { r.n1 } else { r.n2 } as f64)).collect(),
        )
    }
}

fn position_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(feature = "parallel")]
fn map_positions<T: Send>(n: usize, f: impl Fn(usize) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_positions<T>(n: usize, f: impl Fn(usize) -> Result<T>) -> Result<Vec<T>> {
    (0..n).map(f).collect()
}

fn fitted_or_zero(pattern: Result<FringePattern>, period: f64) -> Result<f64> {
    match fit_visibility(&pattern?, period) {
        Ok(fit) => Ok(fit.visibility),
        Err(Error::DegenerateFit { .. }) => Ok(0.0),
        Err(e) => Err(e),
    }
}

pub fn simulate_scan(app: &Apparatus, config: &ScanConfig, hyp: &OutcomeHypothesis) -> Result<ScanSummary> {
    let mut warnings = app.check()?;
    let f_s = fringe_spacing(app);
    config.check(f_s)?;
    hypothesis_visibility(hyp)?;

    if !design::validate(app, 3.0 * f_s).is_ok_and(|r| r.passes()) {
        warnings.push("apparatus does not pass design validation".into());
    }
    let frozen = if config.freeze_detectors { Some(detector_layout(app, 0.0)?) } else { None };

    let records = map_positions(config.x_positions.len(), |i| {
        let x = config.x_positions[i];
        let layout = match frozen {
            Some(l) => l,
            None => detector_layout(app, x)?,
        };
        let source = PhotonSource::new(app, x, hyp, layout)?;
        let mut rng = position_rng(config.seed, i as u64);
        let mut rec = ScanRecord {
            x,
            n: 0,
            n1: 0,
            n2: 0,
            misdetected: 0,
            i1_theory: detector_intensity(app, x, Slit::One),
            i2_theory: detector_intensity(app, x, Slit::Two),
        };
        for _ in 0..config.photons_per_position {
            let Some(ev) = source.emit(&mut rng)? else { continue };
            match ev.detector {
                Some(Slit::One) => rec.n1 += 1,
                Some(Slit::Two) => rec.n2 += 1,
                None => continue,
            }
            if ev.misdetected {
                rec.misdetected += 1;
            }
        }
        rec.n = rec.n1 + rec.n2;
        Ok(rec)
    })?;

    let total: u64 = records.iter().map(|r| r.n).sum();
    let missed: u64 = records.iter().map(|r| r.misdetected).sum();
    let mut summary = ScanSummary {
        records,
        v_total: 0.0,
        v_1: 0.0,
        v_2: 0.0,
        misdetection_rate: if total == 0 { 0.0 } else { missed as f64 / total as f64 },
        hypothesis: *hyp,
        warnings,
    };
    summary.v_total = fitted_or_zero(summary.total_pattern(), f_s)?;
    summary.v_1 = fitted_or_zero(summary.detector_pattern(Slit::One), f_s)?;
    summary.v_2 = fitted_or_zero(summary.detector_pattern(Slit::Two), f_s)?;
    Ok(summary)
}

/// Mirror-free reference: one screen detector counting at each position with
/// acceptance `I(x) / 4`.
pub fn conventional_scan(app: &Apparatus, config: &ScanConfig) -> Result<FringePattern> {
    app.check()?;
    config.check(fringe_spacing(app))?;
    let counts = map_positions(config.x_positions.len(), |i| {
        let x = config.x_positions[i];
        let rate = screen_intensity(app, x) / 4.0;
        let mut rng = position_rng(config.seed, CONVENTIONAL_STREAM + i as u64);
        let n = (0..config.photons_per_position).filter(|_| rng.random::<f64>() < rate).count();
        Ok((x, n as f64))
    })?;
    FringePattern::new(counts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquare {
    pub chi2: f64,
    pub dof: usize,
    pub chi2_per_dof: f64,
    pub compatible: bool,
}

/// Two-sample Pearson chi-square for histograms with unequal totals.
pub fn chi2_homogeneity(a: &[f64], b: &[f64]) -> ChiSquare {
    let (sa, sb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    let (ka, kb) = if sa > 0.0 && sb > 0.0 { ((sb / sa).sqrt(), (sa / sb).sqrt()) } else { (1.0, 1.0) };
    let mut chi2 = 0.0;
    let mut bins = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if x + y <= 0.0 {
            continue;
        }
        chi2 += (ka * x - kb * y).powi(2) / (x + y);
        bins += 1;
    }
    let dof = bins.saturating_sub(1).max(1);
    let chi2_per_dof = chi2 / dof as f64;
    ChiSquare { chi2, dof, chi2_per_dof, compatible: chi2_per_dof < 2.0 }
}

/// Compares `N1 + N2` of a mirror scan against the reference `N(x)`.
pub fn compare_distributions(reference: &FringePattern, scan: &ScanSummary) -> Result<ChiSquare> {
    if reference.len() != scan.records.len() {
        return Err(Error::GridMismatch(format!(
            "{} reference points vs {} scan points",
            reference.len(),
            scan.records.len()
        )));
    }
    for ((x, _), rec) in reference.samples().iter().zip(&scan.records) {
        if (x - rec.x).abs() > 1e-12 * x.abs().max(rec.x.abs()).max(1e-9) {
            return Err(Error::GridMismatch(format!("x {x:.9e} vs {:.9e}", rec.x)));
        }
    }
    let reference: Vec<f64> = reference.values().collect();
    let sum: Vec<f64> = scan.records.iter().map(|r| (r.n1 + r.n2) as f64).collect();
    Ok(chi2_homogeneity(&reference, &sum))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn app() -> Apparatus {
        Apparatus::reference_design()
    }

    fn config(points: usize, photons: u64, seed: u64) -> ScanConfig {
        let f = fringe_spacing(&app());
        ScanConfig::uniform(-3.0 * f, 3.0 * f, points, photons, seed)
    }

    #[test]
    fn hypothesis_parsing() {
        assert_eq!("full".parse::<OutcomeHypothesis>().unwrap(), OutcomeHypothesis::FullDuality);
        assert_eq!("exclusive".parse::<OutcomeHypothesis>().unwrap(), OutcomeHypothesis::Exclusive);
        assert_eq!(
            "partial:0.6".parse::<OutcomeHypothesis>().unwrap(),
            OutcomeHypothesis::Partial { distinguishability: 0.6 }
        );
        assert!("partial:1.2".parse::<OutcomeHypothesis>().is_err());
        assert!("maybe".parse::<OutcomeHypothesis>().is_err());
        let json = serde_json::to_string(&OutcomeHypothesis::partial(0.3).unwrap()).unwrap();
        assert_eq!(json, "\"partial:0.3\"");
    }

    #[test]
    fn scan_config_checks() {
        let f = fringe_spacing(&app());
        assert!(config(41, 10, 1).check(f).is_ok());
        assert!(config(7, 10, 1).check(f).is_err());
        assert!(config(41, 0, 1).check(f).is_err());
        // 12 points over 6 periods: step > F_s/2
        assert!(config(12, 10, 1).check(f).is_err());
        let mut c = config(41, 10, 1);
        c.x_positions.swap(3, 4);
        assert!(c.check(f).is_err());
        assert!(ScanConfig::uniform(0.0, f, 40, 10, 1).check(f).is_err());
    }

    #[test]
    fn exclusive_acceptance_is_half() {
        let a = app();
        let layout = detector_layout(&a, 0.0).unwrap();
        for x in [0.0, 1e-4, 3.3e-4, 2.1e-3] {
            let l = detector_layout(&a, x).unwrap_or(layout);
            let s = PhotonSource::new(&a, x, &OutcomeHypothesis::Exclusive, l).unwrap();
            assert_eq!(s.acceptance(), 0.5);
        }
    }

    #[test]
    fn full_duality_acceptance_at_center() {
        let a = app();
        let s = PhotonSource::new(&a, 0.0, &OutcomeHypothesis::FullDuality, detector_layout(&a, 0.0).unwrap()).unwrap();
        let expect = 0.5 * (1.0 + reflection_phase(&a, 0.0).cos());
        assert_eq!(s.acceptance(), expect);
        assert!(expect > 0.999);
    }

    #[test]
    fn reference_design_never_misdetects() {
        let a = app();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let source =
            PhotonSource::new(&a, 0.0, &OutcomeHypothesis::FullDuality, detector_layout(&a, 0.0).unwrap()).unwrap();
        let mut hits = 0;
        for _ in 0..100_000 {
            if let Some(ev) = source.emit(&mut rng).unwrap() {
                assert!(!ev.misdetected);
                hits += ev.detector.is_some() as u32;
            }
        }
        assert!(hits > 1000);
        let ev = photon_event(&a, 1e-4, &OutcomeHypothesis::Exclusive, &mut rng).unwrap();
        assert!(ev.is_none_or(|e| !e.misdetected));
    }

    #[test]
    fn wide_mirror_misdetects() {
        let mut a = app();
        a.mirror_width = 0.6e-3;
        let summary = simulate_scan(&a, &config(41, 2000, 3), &OutcomeHypothesis::FullDuality).unwrap();
        assert!(summary.misdetection_rate > 0.0);
        assert!(summary.warnings.iter().any(|w| w.contains("validation")));
    }

    #[test]
    fn scan_is_deterministic_and_conserves_counts() {
        let a = app();
        let c = config(41, 500, 42);
        let s1 = simulate_scan(&a, &c, &OutcomeHypothesis::FullDuality).unwrap();
        let s2 = simulate_scan(&a, &c, &OutcomeHypothesis::FullDuality).unwrap();
        assert_eq!(s1, s2);
        for r in &s1.records {
            assert_eq!(r.n, r.n1 + r.n2);
            assert!(r.misdetected <= r.n);
            assert_eq!(r.i1_theory, r.i2_theory);
        }
        let other = simulate_scan(&a, &ScanConfig { seed: 43, ..c }, &OutcomeHypothesis::FullDuality).unwrap();
        assert_ne!(s1.records, other.records);
    }

    #[test]
    fn frozen_detectors_lose_counts_off_center() {
        let a = app();
        let mut c = config(41, 2000, 5);
        c.freeze_detectors = true;
        let s = simulate_scan(&a, &c, &OutcomeHypothesis::FullDuality).unwrap();
        let edge = s.records.first().unwrap();
        assert_eq!(edge.n, 0);
        let mid = &s.records[20];
        assert!(mid.n > 0);
    }

    #[test]
    fn conventional_scan_shape() {
        let a = app();
        let f = fringe_spacing(&a);
        let c = config(41, 10_000, 9);
        let pat = conventional_scan(&a, &c).unwrap();
        let fit = fit_visibility(&pat, f).unwrap();
        assert!(fit.visibility >= 0.95);
        // evenness within 3 sigma (two independent Poisson-like counts)
        let v: Vec<f64> = pat.values().collect();
        for i in 0..v.len() / 2 {
            let (l, r) = (v[i], v[v.len() - 1 - i]);
            assert!((l - r).abs() <= 3.0 * (l + r + 1.0).sqrt(), "{l} vs {r}");
        }
    }

    #[test]
    fn chi2_identity_and_mismatch() {
        let a = [10.0, 20.0, 30.0, 0.0];
        let c = chi2_homogeneity(&a, &a);
        assert_eq!(c.chi2, 0.0);
        assert!(c.compatible);
        let scaled: Vec<f64> = a.iter().map(|v| v * 3.0).collect();
        assert!(chi2_homogeneity(&a, &scaled).chi2 < 1e-20);

        let f = fringe_spacing(&app());
        let s = simulate_scan(&app(), &config(41, 200, 1), &OutcomeHypothesis::FullDuality).unwrap();
        let short = FringePattern::from_fn(&config(40, 1, 1).x_positions, |_| 1.0).unwrap();
        assert!(matches!(compare_distributions(&short, &s), Err(Error::GridMismatch(_))));
        let shifted = FringePattern::from_fn(
            &config(41, 1, 1).x_positions.iter().map(|x| x + f / 100.0).collect::<Vec<_>>(),
            |_| 1.0,
        )
        .unwrap();
        assert!(matches!(compare_distributions(&shifted, &s), Err(Error::GridMismatch(_))));
        let same = s.total_pattern().unwrap();
        assert_eq!(compare_distributions(&same, &s).unwrap().chi2_per_dof, 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn counts_conserved_and_balanced(seed in any::<u64>(), d in 0.0f64..=1.0) {
            let hyp = OutcomeHypothesis::partial(d).unwrap();
            let s = simulate_scan(&app(), &config(17, 400, seed), &hyp).unwrap();
            for r in &s.records {
                prop_assert_eq!(r.n, r.n1 + r.n2);
                prop_assert_eq!(r.misdetected, 0);
                // N1 and N2 share the same expectation: binomial split of N
                let sigma = (r.n as f64 * 0.25).sqrt();
                prop_assert!((r.n1 as f64 - r.n2 as f64).abs() / 2.0 <= 4.0 * sigma + 1.0);
            }
            prop_assert!((0.0..=1.0).contains(&s.v_total));
        }
    }
}
