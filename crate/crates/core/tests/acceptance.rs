//! Acceptance suite. Every test prints a single `criterion N: PASS|FAIL` line
//! with the measured quantities, then asserts.

use std::io::Write;

use resonator_core::groups::{expansion_epsilon, irreps};
use resonator_core::linalg::{max_abs_diff, CVector};
use resonator_core::schottky::{ClassConvention, WordSet};
use resonator_core::zeta::{self, ContourMethod, ZeroClass};
use resonator_core::{
    thermo, transfer, wordops, Complex64, Discretization, FiniteGroup, GroupHom, GroupSpec, ScanRectangle,
    SchottkyData, SurfaceConfig, Twist, UnitaryRep,
};

fn report(n: usize, pass: bool, detail: &str) {
    // Written straight to the process stdout so the line survives output capture.
    let mut out = std::io::stdout().lock();
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(out, "criterion {n}: {verdict} {detail}");
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn funnel() -> SchottkyData {
    SchottkyData::build(&SurfaceConfig::symmetric_funnel(2, 1.0)).unwrap()
}

fn sl2z() -> SchottkyData {
    SchottkyData::build(&SurfaceConfig::sl2z_funnel()).unwrap()
}

fn on_funnel(spec: GroupSpec) -> GroupHom {
    spec.build(&funnel()).unwrap()
}

fn cyclic(n: usize) -> GroupHom {
    on_funnel(GroupSpec::Cyclic { n, images: None })
}

/// Homomorphisms used by the algebraic criteria: cyclic, dihedral and the
/// `SL_2(F_3)` quotient of the integer preset.
fn algebra_homs() -> Vec<(String, GroupHom)> {
    let mut out = Vec::new();
    for n in 2..=7 {
        out.push((format!("Z/{n}"), cyclic(n)));
    }
    for n in 3..=5 {
        out.push((format!("D{n}"), on_funnel(GroupSpec::Dihedral { n, images: None })));
    }
    out.push(("SL2(F3)".into(), GroupSpec::Congruence { q: 3 }.build(&sl2z()).unwrap()));
    out
}

#[test]
fn criterion_01_cylinder_oracle() {
    let s = SchottkyData::build(&SurfaceConfig::cylinder(2.0)).unwrap();
    let disc = Discretization::new(&s, 32).unwrap();
    let twist = Twist::trivial(1);
    let rect = ScanRectangle::new(-0.4, 0.4, -7.0, 7.0).unwrap();
    let found = zeta::locate_zeros(&disc, &rect, &twist, 1e-10).unwrap();
    let pi = std::f64::consts::PI;
    let expected: Vec<Complex64> = [-2.0, -1.0, 0.0, 1.0, 2.0].iter().map(|k| c(0.0, k * pi)).collect();
    let located = found.zeros.len() == expected.len()
        && expected
            .iter()
            .all(|e| found.zeros.iter().any(|z| (z.s() - e).norm() <= 1e-6));
    let count = zeta::count_zeros(&disc, &rect, &twist).unwrap();
    let mult: Vec<i64> = found.zeros.iter().map(|z| z.multiplicity).collect();
    let pass = located && count == 5;
    report(
        1,
        pass,
        &format!("locations match: {located}, multiplicities {mult:?}, count_zeros {count} (expected 5)"),
    );
    assert!(pass);
}

#[test]
fn criterion_02_fredholm_matches_euler() {
    let s = funnel();
    let delta = thermo::hausdorff_dimension(&s, 1e-12).unwrap();
    let disc = Discretization::new(&s, 24).unwrap();
    let twist = Twist::trivial(2);
    let mut worst: f64 = 0.0;
    let mut detail = String::new();
    for p in [c(3.0, 0.0), c(2.5, 1.0)] {
        let det = disc.fredholm_det(p, &twist);
        let euler = zeta::zeta_euler(&s, p, &twist, 12, 30, ClassConvention::Oriented, delta).unwrap();
        let rel = (det - euler.value).norm() / euler.value.norm();
        worst = worst.max(rel);
        detail.push_str(&format!("s={p}: rel {rel:.2e}; "));
    }
    let pass = worst <= 1e-6;
    report(2, pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_03_dimension_consistency() {
    let s = funnel();
    let delta = thermo::hausdorff_dimension(&s, 1e-13).unwrap();
    let disc = Discretization::new(&s, 24).unwrap();
    let zero = zeta::real_zero_near(&disc, delta, 1e-13).unwrap();
    let orbit = thermo::orbit_sum_dimension(&s, 12, 1e-12).unwrap();
    let (d1, d2) = ((delta - zero).abs(), (delta - orbit).abs());
    let pass = d1 <= 1e-6 && d2 <= 1e-4;
    report(
        3,
        pass,
        &format!("delta {delta:.12}, det zero {zero:.12} (diff {d1:.2e}), orbit sum {orbit:.8} (diff {d2:.2e})"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_exact_algebra() {
    let (mut rec_worst, mut norm_worst): (f64, f64) = (0.0, 0.0);
    for (_, h) in algebra_homs() {
        for rho in irreps(h.group()).unwrap() {
            let t = rho.pull_back(&h);
            let rec = wordops::wn_recursion(&t, 8);
            for n in 1..=8 {
                let bf = wordops::word_operator(&t, WordSet::All, n).unwrap();
                rec_worst = rec_worst.max(max_abs_diff(&rec[n], &bf.matrix));
                let cf = wordops::wn_norm_closed_form(&t, n);
                norm_worst = norm_worst.max((cf - bf.norm).abs() / bf.norm.max(1.0));
            }
        }
    }
    let pass = rec_worst <= 1e-10 && norm_worst <= 1e-9;
    report(
        4,
        pass,
        &format!("recursion vs brute force {rec_worst:.2e}, closed-form norm relative {norm_worst:.2e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_05_spectral_bounds() {
    let mut homs = algebra_homs();
    for q in [2, 5] {
        homs.push((format!("SL2(F{q})"), GroupSpec::Congruence { q }.build(&sl2z()).unwrap()));
    }
    let mut failures = Vec::new();
    let mut tested = 0;
    for (name, h) in &homs {
        let eps = expansion_epsilon(h);
        for rho in irreps(h.group()).unwrap().iter().skip(1) {
            let r = wordops::verify_decay(h, rho, 1).unwrap();
            tested += 1;
            if !(r.lambda_bound_holds && r.omega_bound_holds) {
                failures.push(format!("{name}/{} (eps {eps:.4})", rho.label()));
            }
        }
    }
    let pass = failures.is_empty();
    report(5, pass, &format!("{tested} irreps over {} homomorphisms, violations {failures:?}", homs.len()));
    assert!(pass);
}

#[test]
fn criterion_06_weight_normalization() {
    let s = funnel();
    let delta = thermo::hausdorff_dimension(&s, 1e-13).unwrap();
    let disc = Discretization::new(&s, 32).unwrap();
    let points = s.limit_points(8, 13).unwrap();
    let points = &points[..50.min(points.len())];
    let mut worst: f64 = 0.0;
    for sigma in [0.1, delta / 2.0, delta] {
        let rpf = thermo::rpf(&disc, sigma).unwrap();
        for x in points {
            for n in 1..=6 {
                let total: f64 = thermo::weights(&disc, &rpf, x, n).unwrap().iter().map(|(_, w)| w).sum();
                worst = worst.max((total - 1.0).abs());
            }
        }
    }
    let pass = points.len() == 50 && worst <= 1e-8;
    report(6, pass, &format!("{} limit points, max |sum w - 1| = {worst:.2e}", points.len()));
    assert!(pass);
}

#[test]
fn criterion_07_venkov_zograf() {
    let s = funnel();
    let disc = Discretization::new(&s, 16).unwrap();
    let points = [c(0.3, 0.0), c(0.5, 2.0), c(1.0, -1.5), c(0.1, 4.0), c(2.0, 0.5)];
    let homs = [
        ("Z/2", cyclic(2)),
        ("Z/3", GroupHom::new(FiniteGroup::cyclic(3).unwrap(), vec![1, 2], 2).unwrap()),
        ("S3", GroupHom::new(FiniteGroup::dihedral(3).unwrap(), vec![1, 3], 2).unwrap()),
    ];
    let mut vz: f64 = 0.0;
    let mut ds: f64 = 0.0;
    for (_, h) in &homs {
        vz = vz.max(zeta::venkov_zograf_check(&disc, h, &points).unwrap());
        let reps = irreps(h.group()).unwrap();
        let (a, b) = (reps[1].pull_back(h), reps.last().unwrap().pull_back(h));
        let sum = a.direct_sum(&b);
        for &p in &points {
            let lhs = disc.fredholm_det(p, &sum);
            let rhs = disc.fredholm_det(p, &a) * disc.fredholm_det(p, &b);
            ds = ds.max((lhs - rhs).norm() / rhs.norm());
        }
    }
    let pass = vz <= 1e-6 && ds <= 1e-9;
    report(7, pass, &format!("regular vs irrep product {vz:.2e}, direct sum {ds:.2e}"));
    assert!(pass);
}

#[test]
fn criterion_08_patterson_leading_zero() {
    let s = funnel();
    let delta = thermo::hausdorff_dimension(&s, 1e-13).unwrap();
    let disc = Discretization::new(&s, 24).unwrap();
    let right = ScanRectangle::new(delta + 1e-3, delta + 1.0, -10.0, 10.0).unwrap();
    let mut twists = vec![Twist::trivial(2)];
    for h in [
        cyclic(2),
        GroupHom::new(FiniteGroup::cyclic(3).unwrap(), vec![1, 2], 2).unwrap(),
        GroupHom::new(FiniteGroup::dihedral(3).unwrap(), vec![1, 3], 2).unwrap(),
    ] {
        twists.extend(irreps(h.group()).unwrap().iter().skip(1).map(|r| r.pull_back(&h)));
    }
    twists.push(Twist::abelianization_character(&[0.05, 0.0]));
    twists.push(Twist::abelianization_character(&[0.3, 0.1]));
    let counts: Vec<i64> = twists
        .iter()
        .map(|t| zeta::count_zeros(&disc, &right, t).unwrap())
        .collect();
    let boxed = ScanRectangle::new(delta - 5e-3, delta + 5e-3, -5e-3, 5e-3).unwrap();
    let at_delta = zeta::count_zeros(&disc, &boxed, &Twist::trivial(2)).unwrap();
    let pass = counts.iter().all(|&n| n == 0) && at_delta == 1;
    report(
        8,
        pass,
        &format!("counts right of delta {counts:?} over {} twists, box around delta {at_delta}", twists.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_09_new_zero_gap() {
    let s = sl2z();
    let delta = thermo::hausdorff_dimension(&s, 1e-13).unwrap();
    let disc = Discretization::new(&s, 16).unwrap();
    let rect = ScanRectangle::new(delta - 0.15, delta, -10.0, 10.0).unwrap();
    let mut table = Vec::new();
    let mut pass = true;
    for q in [2, 3, 5] {
        let h = GroupSpec::Congruence { q }.build(&s).unwrap();
        let scan = zeta::new_zero_scan(&disc, &h, &rect, 1e-8, delta).unwrap();
        let new: usize = scan
            .reports
            .iter()
            .map(|r| r.zeros.iter().filter(|z| z.class == ZeroClass::New).count())
            .sum();
        pass &= scan.eta > 0.0;
        table.push(format!("q={q} |G|={} eps={:.4} eta={:.4} new={new}", scan.order, scan.epsilon, scan.eta));
    }
    report(9, pass, &format!("delta {delta:.6}; {}", table.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_10_eigenfunction_identity() {
    let s = funnel();
    let delta = thermo::hausdorff_dimension(&s, 1e-13).unwrap();
    let disc = Discretization::new(&s, 24).unwrap();
    let points = s.limit_points(5, 2).unwrap();
    let rect = ScanRectangle::new(delta - 0.05, delta, -0.5, 0.5).unwrap();
    let scan = zeta::character_zeta_scan(&disc, &[vec![0.05, 0.0]], &rect, 1e-12, delta).unwrap();
    let chi = Twist::abelianization_character(&[0.05, 0.0]);
    let z_chi = scan[0]
        .report
        .zeros
        .iter()
        .max_by(|a, b| a.re.partial_cmp(&b.re).unwrap())
        .map(|z| z.s())
        .expect("a character zero below delta");
    let zeros = [(Twist::trivial(2), c(delta, 0.0)), (chi, z_chi)];
    let mut worst: f64 = 0.0;
    let mut min_gain = f64::INFINITY;
    for (twist, z) in &zeros {
        let sample = disc.unit_eigenfunction(*z, twist, 1e-6).unwrap();
        let probe = disc.unit_eigenfunction(z + 1e-2, twist, 1.0).unwrap();
        for n in [1, 3] {
            let r = transfer::convexity_identity_check(&s, &sample, twist, n, &points).unwrap();
            let off = transfer::convexity_identity_check(&s, &probe, twist, n, &points).unwrap();
            worst = worst.max(r);
            min_gain = min_gain.min(off / r.max(1e-300));
        }
    }
    let pass = worst <= 1e-5 && min_gain >= 10.0;
    report(
        10,
        pass,
        &format!("character zero {z_chi:.8}, max residual {worst:.2e}, smallest probe gain {min_gain:.1e}"),
    );
    assert!(pass);
}

#[test]
fn criterion_11_twisted_average_decay() {
    let s = funnel();
    let h = GroupHom::new(FiniteGroup::cyclic(3).unwrap(), vec![1, 2], 2).unwrap();
    let nu: UnitaryRep = irreps(h.group()).unwrap()[1].clone();
    let f = |y: f64| CVector::from_element(1, Complex64::from(1.0 + 0.3 * y));
    let points = s.limit_points(6, 3).unwrap();
    let points = &points[..10.min(points.len())];
    let mut worst: f64 = 0.0;
    for x in points {
        let a2 = wordops::twisted_average(&s, &h, &nu, f, x, 2).unwrap();
        let a6 = wordops::twisted_average(&s, &h, &nu, f, x, 6).unwrap();
        worst = worst.max(a6.residual_part.norm() / a2.residual_part.norm());
    }
    let pass = points.len() == 10 && worst < 0.25;
    report(11, pass, &format!("{} points, max N=6/N=2 ratio {worst:.3}", points.len()));
    assert!(pass);
}

#[test]
fn contour_engines_agree() {
    // Not a numbered criterion: the two winding engines on the same boxes.
    let s = funnel();
    let disc = Discretization::new(&s, 16).unwrap();
    let twist = Twist::abelianization_character(&[0.2, 0.0]);
    let rect = ScanRectangle::new(0.0, 0.4, -3.0, 3.0).unwrap();
    let a = zeta::count_zeros_with(&disc, &rect, &twist, ContourMethod::Phase).unwrap();
    let b = zeta::count_zeros_with(&disc, &rect, &twist, ContourMethod::LogDerivative).unwrap();
    assert_eq!(a, b);
}
