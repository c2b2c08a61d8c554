//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL ...` line;
//! run with `--nocapture` to see them.

use std::path::Path;
use std::process::Command;

use mirrorslit::design::{limiting_half_width, limiting_half_widths, required_mirror_width, validate};
use mirrorslit::geometry::{detector_separation, reflect, signed_angle, Slit, Vec2};
use mirrorslit::montecarlo::{compare_distributions, conventional_scan, simulate_scan};
use mirrorslit::wavemodel::{
    detector_intensity, fit_visibility, fringe_spacing, path_phase, reflection_phase, screen_intensity,
};
use mirrorslit::{Apparatus, OutcomeHypothesis, Point2, Ray2, ScanConfig};
use nalgebra::Unit;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

fn lab() -> Apparatus {
    Apparatus::reference_design()
}

fn verdict(n: u32, pass: bool, detail: &str) {
    println!("criterion {n}: {} {detail}", if pass { "PASS" } else { "FAIL" });
}

fn standard_scan(photons: u64, seed: u64) -> ScanConfig {
    let f = fringe_spacing(&lab());
    ScanConfig::uniform(-3.0 * f, 3.0 * f, 41, photons, seed)
}

#[test]
fn criterion_01_fringe_spacing() {
    let f = fringe_spacing(&lab());
    let pass = (f - 0.7e-3).abs() <= 0.001e-3;
    verdict(1, pass, &format!("F_s = {:.6} mm (target 0.7 ± 0.001)", f * 1e3));
    assert!(pass);
}

mod oracle {
    //! Plain-float ray trace, sharing nothing with the library geometry.

    pub type V = [f64; 2];

    fn sub(a: V, b: V) -> V {
        [a[0] - b[0], a[1] - b[1]]
    }
    fn add(a: V, b: V, s: f64) -> V {
        [a[0] + s * b[0], a[1] + s * b[1]]
    }
    fn unit(a: V) -> V {
        let n = a[0].hypot(a[1]);
        [a[0] / n, a[1] / n]
    }
    fn dot(a: V, b: V) -> f64 {
        a[0] * b[0] + a[1] * b[1]
    }
    fn cross(a: V, b: V) -> f64 {
        a[0] * b[1] - a[1] * b[0]
    }
    fn mirror_about(v: V, n: V) -> V {
        add(v, n, -2.0 * dot(v, n))
    }

    pub struct Setup {
        pub d: f64,
        pub l: f64,
        pub theta: f64,
        pub arm: f64,
        pub aperture: f64,
    }

    impl Setup {
        fn slit(&self, one: bool) -> V {
            [if one { self.d / 2.0 } else { -self.d / 2.0 }, 0.0]
        }
        fn normal(&self) -> V {
            [self.theta.sin(), -self.theta.cos()]
        }
        /// Inner aperture edge of the detector for `one`, placed from the
        /// mirror center at `x`.
        fn inner_edge(&self, x: f64, one: bool) -> V {
            let m0 = [x, self.l];
            let r = mirror_about(unit(sub(m0, self.slit(one))), self.normal());
            let c = add(m0, r, self.arm);
            let left = [-r[1], r[0]];
            add(c, left, if one { self.aperture / 2.0 } else { -self.aperture / 2.0 })
        }
        /// Which side of the other detector's inner edge the ray from `one`'s
        /// slit through the mirror point at signed offset `s` passes.
        fn side(&self, x: f64, one: bool, s: f64) -> f64 {
            let u = [self.theta.cos(), self.theta.sin()];
            let p = add([x, self.l], u, s);
            let r = mirror_about(unit(sub(p, self.slit(one))), self.normal());
            cross(r, sub(self.inner_edge(x, !one), p)).signum()
        }
        /// Smallest half-width on a `step` grid at which the endpoint ray
        /// reaches the wrong detector's edge.
        pub fn scan_limit(&self, x: f64, one: bool, step: f64, max: f64) -> Option<f64> {
            let sign = if one { 1.0 } else { -1.0 };
            let start = self.side(x, one, sign * step);
            let mut h = step;
            while h <= max {
                if self.side(x, one, sign * h) != start {
                    return Some(h);
                }
                h += step;
            }
            None
        }
    }
}

#[test]
fn criterion_02_limiting_half_widths() {
    let app = lab();
    let f = fringe_spacing(&app);
    let (w1, w2) = limiting_half_widths(&app);
    let (w1, w2) = (w1.unwrap(), w2.unwrap());

    let setup = oracle::Setup {
        d: app.slit_separation,
        l: app.screen_distance,
        theta: app.mirror_angle,
        arm: app.arm1,
        aperture: app.aperture,
    };
    let step = 1e-6;
    let o2 = setup.scan_limit(0.0, false, step, 2e-3).unwrap();
    let o1 = setup.scan_limit(3.0 * f, true, step, 2e-3).unwrap();
    let oracle_ok = (w2 - o2).abs() <= 2e-6 && (w1 - o1).abs() <= 2e-6;

    let target_ok = (w2 - 0.268e-3).abs() <= 0.005e-3 && (w1 - 0.273e-3).abs() <= 0.005e-3;
    let pass = oracle_ok && target_ok;
    verdict(
        2,
        pass,
        &format!(
            "w2(x=0) = {:.4} mm, w1(x=3F_s) = {:.4} mm (targets 0.268 / 0.273 ± 0.005: {}); \
             1 µm scan {:.4} / {:.4} mm ({})",
            w2 * 1e3,
            w1 * 1e3,
            if target_ok { "met" } else { "not met" },
            o2 * 1e3,
            o1 * 1e3,
            if oracle_ok { "agrees within 2 µm" } else { "disagrees" },
        ),
    );
    // also at the other positions, bisection and scan agree
    for x in [0.5 * f, 1.5 * f] {
        let b = limiting_half_width(&app, x, Slit::Two).unwrap();
        let s = setup.scan_limit(x, false, step, 2e-3).unwrap();
        assert!((b - s).abs() <= 2e-6, "x = {x}: {b} vs {s}");
    }
    assert!(oracle_ok, "bisection disagrees with the linear scan");
    assert!(target_ok, "limiting half-widths {w2:.4e} / {w1:.4e} m miss 0.268 / 0.273 mm");
}

#[test]
fn criterion_03_required_width() {
    let w = required_mirror_width(&lab()).unwrap();
    let pass = w == 0.1e-3;
    verdict(3, pass, &format!("required w = {w:e} m (target 1e-4 exactly)"));
    assert!(pass);
}

#[test]
fn criterion_04_detector_separation() {
    let app = lab();
    let s0 = detector_separation(&app, 0.0).unwrap();
    let near = (s0.approx - 5e-3).abs() / 5e-3 <= 0.05;
    let f = fringe_spacing(&app);
    let mut worst: f64 = 0.0;
    for i in 0..=300 {
        let x = 3.0 * f * i as f64 / 300.0;
        let s = detector_separation(&app, x).unwrap();
        worst = worst.max((s.exact - s.approx).abs() / s.exact);
    }
    let pass = near && worst < 0.01;
    verdict(
        4,
        pass,
        &format!(
            "L12 approx = {:.4} mm, exact = {:.4} mm; worst rel. gap over [0, 3F_s] = {worst:.2e}",
            s0.approx * 1e3,
            s0.exact * 1e3
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_05_misdetection() {
    let app = lab();
    let report = validate(&app, 3.0 * fringe_spacing(&app)).unwrap();
    let clean = simulate_scan(&app, &standard_scan(30_000, 11), &OutcomeHypothesis::FullDuality).unwrap();
    let detected: u64 = clean.records.iter().map(|r| r.n).sum();
    let mis: u64 = clean.records.iter().map(|r| r.misdetected).sum();

    let mut wide = lab();
    wide.mirror_width = 0.6e-3;
    let wide_report = validate(&wide, 3.0 * fringe_spacing(&wide)).unwrap();
    let dirty = simulate_scan(&wide, &standard_scan(10_000, 11), &OutcomeHypothesis::FullDuality).unwrap();

    let pass = report.passes()
        && detected >= 100_000
        && mis == 0
        && clean.misdetection_rate == 0.0
        && !wide_report.passes()
        && dirty.misdetection_rate > 0.0;
    verdict(
        5,
        pass,
        &format!(
            "reference design: {mis} of {detected} misdetected; w = 0.6 mm: validate passes = {}, rate = {:.4}",
            wide_report.passes(),
            dirty.misdetection_rate
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_visibility_recovery() {
    let app = lab();
    let f = fringe_spacing(&app);
    let cfg = standard_scan(10_000, 2024);
    let fit = |hyp: &OutcomeHypothesis| {
        let s = simulate_scan(&app, &cfg, hyp).unwrap();
        fit_visibility(&s.total_pattern().unwrap(), f).unwrap().visibility
    };
    let mut lines = Vec::new();
    let mut pass = true;
    let mut pairs = Vec::new();

    let v = fit(&OutcomeHypothesis::FullDuality);
    pass &= v >= 0.95;
    pairs.push((0.0, v));
    lines.push(format!("full V = {v:.4}"));

    let v = fit(&OutcomeHypothesis::Exclusive);
    pass &= v <= 0.05;
    pairs.push((1.0, v));
    lines.push(format!("exclusive V = {v:.4}"));

    for d in [0.3, 0.6, 0.8] {
        let v = fit(&OutcomeHypothesis::partial(d).unwrap());
        let expect = (1.0f64 - d * d).sqrt();
        pass &= (v - expect).abs() <= 0.05;
        pairs.push((d, v));
        lines.push(format!("partial:{d} V = {v:.4} (expect {expect:.4})"));
    }
    let worst = pairs.iter().map(|(d, v)| d * d + v * v).fold(0.0, f64::max);
    pass &= worst <= 1.05;
    lines.push(format!("max D²+V² = {worst:.4}"));

    verdict(6, pass, &lines.join("; "));
    assert!(pass);
}

#[test]
fn criterion_07_sum_rule() {
    let app = lab();
    let cfg = standard_scan(10_000, 77);
    let reference = conventional_scan(&app, &cfg).unwrap();
    let full = simulate_scan(&app, &cfg, &OutcomeHypothesis::FullDuality).unwrap();
    let excl = simulate_scan(&app, &cfg, &OutcomeHypothesis::Exclusive).unwrap();
    let a = compare_distributions(&reference, &full).unwrap();
    let b = compare_distributions(&reference, &excl).unwrap();
    let pass = a.compatible && !b.compatible;
    verdict(
        7,
        pass,
        &format!(
            "full chi²/dof = {:.3} (compatible {}); exclusive chi²/dof = {:.1} (compatible {})",
            a.chi2_per_dof, a.compatible, b.chi2_per_dof, b.compatible
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_08_phase_smallness() {
    let app = lab();
    let f = fringe_spacing(&app);
    let mut worst: f64 = 0.0;
    for i in 0..=2000 {
        let x = f / 10.0 + 10.0 * f * i as f64 / 2000.0;
        for x in [x, -x] {
            let ratio = reflection_phase(&app, x).abs() / path_phase(&app, x).abs();
            worst = worst.max(ratio);
        }
    }
    let pass = worst < 0.1;
    verdict(8, pass, &format!("max |2(γ1−γ2)| / |k(d1−d2)| over F_s/10 ≤ |x| ≤ 10.1 F_s = {worst:.4}"));
    assert!(pass);
}

fn simulate_into(dir: &Path) {
    let status = Command::new(env!("CARGO_BIN_EXE_mirrorslit"))
        .args(["simulate", "--seed", "9", "--no-timestamp", "--out"])
        .arg(dir)
        .status()
        .unwrap();
    assert!(status.success(), "simulate exited with {status}");
}

#[test]
fn criterion_09_determinism() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    simulate_into(a.path());
    simulate_into(b.path());
    let mut same = true;
    for name in ["counts.csv", "summary.json"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        same &= !x.is_empty() && x == y;
    }
    verdict(9, same, "counts.csv and summary.json byte-identical across two runs");
    assert!(same);
}

#[test]
fn criterion_10_invariants() {
    let app = lab();
    let mut runner = TestRunner::new(Config { cases: 512, failure_persistence: None, ..Config::default() });
    let f = fringe_spacing(&app);

    let even = runner.run(&(-10.0 * f..10.0 * f), |x| {
        let (a, b) = (screen_intensity(&app, x), screen_intensity(&app, -x));
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        Ok(())
    });

    let identity = runner.run(&(-10.0 * f..10.0 * f), |x| {
        prop_assert_eq!(detector_intensity(&app, x, Slit::One), detector_intensity(&app, x, Slit::Two));
        Ok(())
    });

    let tau = std::f64::consts::TAU;
    let reflection = runner.run(&(0.0..tau, 0.0..tau, 0.0..tau), |(a, b, c)| {
        let n = Unit::new_normalize(Vec2::new(c.cos(), c.sin()));
        let v = Vec2::new(a.cos(), a.sin());
        let w = Vec2::new(b.cos(), b.sin());
        prop_assume!(v.dot(&n).abs() > 1e-6 && w.dot(&n).abs() > 1e-6);
        let at = Point2::new(0.1, 0.2);
        let rv = reflect(&Ray2::new(at, v), at, &n).unwrap().direction.into_inner();
        let rw = reflect(&Ray2::new(at, w), at, &n).unwrap().direction.into_inner();
        let back = reflect(&Ray2::new(at, rv), at, &n).unwrap().direction.into_inner();
        prop_assert!((back - v).norm() < 1e-12);
        prop_assert!((v.dot(&n).abs() - rv.dot(&n).abs()).abs() < 1e-12);
        prop_assert!((signed_angle(&v, &w).abs() - signed_angle(&rv, &rw).abs()).abs() < 1e-12);
        Ok(())
    });

    let mut small = TestRunner::new(Config { cases: 12, failure_persistence: None, ..Config::default() });
    let conservation = small.run(&(any::<u64>(), 0usize..3), |(seed, h)| {
        let hyp =
            [OutcomeHypothesis::FullDuality, OutcomeHypothesis::Exclusive, OutcomeHypothesis::partial(0.6).unwrap()][h];
        let s = simulate_scan(&app, &ScanConfig::uniform(-3.0 * f, 3.0 * f, 41, 300, seed), &hyp).unwrap();
        for r in &s.records {
            prop_assert_eq!(r.n, r.n1 + r.n2);
        }
        Ok(())
    });

    let results = [
        ("evenness", even.map_err(|e| e.to_string())),
        ("I1 = I2", identity.map_err(|e| e.to_string())),
        ("reflection", reflection.map_err(|e| e.to_string())),
        ("conservation", conservation.map_err(|e| e.to_string())),
    ];
    let failed: Vec<String> =
        results.iter().filter_map(|(name, r)| r.as_ref().err().map(|e| format!("{name}: {e}"))).collect();
    let pass = failed.is_empty();
    verdict(
        10,
        pass,
        &if pass {
            "evenness, I1 = I2, reflection involution/angles, N = N1 + N2".to_string()
        } else {
            failed.join("; ")
        },
    );
    assert!(pass);
}
