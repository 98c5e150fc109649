use resonator_core::zeta::{self, ZeroClass};
use resonator_core::{thermo, Complex64, Discretization, GroupSpec, ScanRectangle, SchottkyData, SurfaceConfig, Twist};

#[test]
fn cylinder_zero_carries_a_unit_eigenfunction() {
    let s = SchottkyData::build(&SurfaceConfig::cylinder(2.0)).unwrap();
    let disc = Discretization::new(&s, 24).unwrap();
    let t = Twist::trivial(1);
    let z = Complex64::new(0.0, std::f64::consts::PI);
    let rect = ScanRectangle::new(-0.1, 0.1, 3.0, 3.3).unwrap();
    let report = zeta::locate_zeros(&disc, &rect, &t, 1e-10).unwrap();
    assert_eq!(report.zeros.len(), 1);
    assert!((report.zeros[0].s() - z).norm() < 1e-6);
    let sample = disc.unit_eigenfunction(report.zeros[0].s(), &t, 1e-6).unwrap();
    assert!((sample.eigenvalue - 1.0).norm() < 1e-6, "{}", sample.eigenvalue);
}

#[test]
fn zeros_are_stable_under_refinement() {
    let s = SchottkyData::build(&SurfaceConfig::symmetric_funnel(2, 1.0)).unwrap();
    let t = Twist::abelianization_character(&[0.7, -1.3]);
    let rect = ScanRectangle::new(0.0, 0.4, -4.0, 4.0).unwrap();
    let coarse = zeta::locate_zeros(&Discretization::new(&s, 16).unwrap(), &rect, &t, 1e-10).unwrap();
    let fine = zeta::locate_zeros(&Discretization::new(&s, 28).unwrap(), &rect, &t, 1e-10).unwrap();
    assert!(!coarse.zeros.is_empty());
    assert_eq!(coarse.winding_total, fine.winding_total);
    for z in &coarse.zeros {
        let nearest = fine.zeros.iter().map(|w| (w.s() - z.s()).norm()).fold(f64::INFINITY, f64::min);
        assert!(nearest < 1e-6, "{:?} moved by {nearest}", z.s());
    }
}

#[test]
fn congruence_cover_classifies_old_and_new_zeros() {
    let s = SchottkyData::build(&SurfaceConfig::sl2z_funnel()).unwrap();
    let disc = Discretization::new(&s, 12).unwrap();
    let delta = thermo::dimension_report(&disc, 1e-13).unwrap().delta;
    let h = GroupSpec::Congruence { q: 2 }.build(&s).unwrap();
    assert!(h.is_surjective());
    let rect = ScanRectangle::new(delta - 0.15, delta, -6.0, 6.0).unwrap();
    let scan = zeta::new_zero_scan(&disc, &h, &rect, 1e-8, delta).unwrap();
    assert_eq!(scan.order, 6);
    assert_eq!(scan.reports.len(), 2);
    for r in &scan.reports {
        let mult: i64 = r.zeros.iter().map(|z| z.multiplicity).sum();
        assert_eq!(mult, r.winding_total, "{}", r.label);
        assert!(r.conjugate_symmetric(1e-6), "{}", r.label);
        for z in &r.zeros {
            assert_ne!(z.class, ZeroClass::Unclassified);
            let old = zeta::is_untwisted_zero(&disc, z.s(), 1e-6).unwrap();
            assert_eq!(old, z.class == ZeroClass::Old);
        }
    }
    // The leading zero at δ belongs to the trivial factor only.
    assert!(scan.eta > 0.0 && scan.eta <= 0.15);
}
