//! Topological pressure, Hausdorff dimension of the limit set, the leading
//! (RPF) eigenfunction and the normalized weights.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::schottky::{reduced_word_count, LimitPoint, Mobius, ReducedWord, SchottkyData, WordSet, DEFAULT_WORD_CAP};
use crate::transfer::{Discretization, DEFAULT_NODES};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PressureMethod {
    /// Leading eigenvalue at `resolution` nodes per interval.
    Eigenvalue,
    /// Periodic orbits of period `resolution`.
    OrbitSum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureProfile {
    pub sigma: f64,
    pub value: f64,
    pub method: PressureMethod,
    pub resolution: usize,
}

/// Leading eigendata of the untwisted operator at real `σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct RpfData {
    pub sigma: f64,
    /// `e^{P(σ)}`.
    pub eigenvalue: f64,
    pub pressure: f64,
    /// `φ_σ` at the collocation nodes, with `φ_σ(first node) = 1`.
    pub eigenfunction: Vec<f64>,
    /// `|λ_2| / λ_1`.
    pub spectral_gap_ratio: f64,
    /// `‖L φ - e^P φ‖ / ‖φ‖`.
    pub residual: f64,
}

/// Power iteration on the untwisted collocation matrix.
pub fn rpf(disc: &Discretization, sigma: f64) -> Result<RpfData> {
    let l = disc.real_transfer(sigma);
    let (lambda, v) = linalg::power_iteration(&l, 20_000, 1e-15)?;
    if !(lambda > 0.0) {
        return Err(Error::NoConvergence(format!("leading eigenvalue {lambda} is not positive")));
    }
    let phi = &v / v[0];
    let residual = (&l * &phi - &phi * lambda).norm() / phi.norm();
    if phi.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NoConvergence("leading eigenfunction is not positive".into()));
    }
    let moduli = linalg::eigenvalue_moduli(&l);
    // Deflation check: the power-iteration eigenvalue must be the spectral radius.
    if (moduli[0] - lambda).abs() > 1e-8 * lambda {
        return Err(Error::NoConvergence(format!(
            "power iteration found {lambda} but the spectral radius is {}",
            moduli[0]
        )));
    }
    let second = moduli.get(1).copied().unwrap_or(0.0);
    Ok(RpfData {
        sigma,
        eigenvalue: lambda,
        pressure: lambda.ln(),
        eigenfunction: phi.iter().copied().collect(),
        spectral_gap_ratio: second / lambda,
        residual,
    })
}

impl RpfData {
    /// `φ_σ(x)` for `x` in interval `disk`, by barycentric interpolation.
    pub fn phi_at(&self, disc: &Discretization, disk: usize, x: f64) -> f64 {
        let m = disc.nodes();
        disc.grid(disk).interpolate_real(&self.eigenfunction[disk * m..(disk + 1) * m], x)
    }
}

/// `P(σ)` from the leading eigenvalue of the discretized operator.
pub fn pressure_eigen(schottky: &SchottkyData, sigma: f64, nodes: usize) -> Result<PressureProfile> {
    let disc = Discretization::new(schottky, nodes)?;
    pressure_with(&disc, sigma)
}

pub fn pressure_with(disc: &Discretization, sigma: f64) -> Result<PressureProfile> {
    let l = disc.real_transfer(sigma);
    let (lambda, _) = linalg::power_iteration(&l, 20_000, 1e-15)?;
    Ok(PressureProfile {
        sigma,
        value: lambda.ln(),
        method: PressureMethod::Eigenvalue,
        resolution: disc.nodes(),
    })
}

/// Geodesic length `2 arccosh(|tr| / 2)` of a hyperbolic matrix.
fn length_of(g: &Mobius) -> f64 {
    2.0 * (g.trace().abs() / 2.0).acosh()
}

/// `ℓ(γ_a)` for every cyclically reduced word of length `n`.
///
/// Each such word has exactly one attracting fixed point, where
/// `|γ_a'| = e^{-ℓ(γ_a)}`; these are the period-`n` points of the
/// boundary map.
pub fn periodic_lengths(schottky: &SchottkyData, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("period must be at least 1".into()));
    }
    let requested = reduced_word_count(schottky.m(), n);
    if requested > DEFAULT_WORD_CAP {
        return Err(Error::SizeLimit {
            requested,
            cap: DEFAULT_WORD_CAP,
        });
    }
    let m = schottky.m();
    let k = 2 * m;
    let mut out = Vec::new();
    // Depth-first over reduced words carrying the running matrix product.
    let mut stack: Vec<(usize, usize, usize, Mobius)> = (0..k).rev().map(|a| (a, a, 1, *schottky.generator(a))).collect();
    while let Some((first, last, len, g)) = stack.pop() {
        if len == n {
            if first != (last + m) % k {
                out.push(length_of(&g));
            }
            continue;
        }
        for a in (0..k).rev() {
            if a != (last + m) % k {
                stack.push((first, a, len + 1, g.compose(schottky.generator(a))));
            }
        }
    }
    Ok(out)
}

/// `(1/n) log Σ_{T^n x = x} |(T^n)'(x)|^{-σ}`.
pub fn pressure_orbit_sum(schottky: &SchottkyData, sigma: f64, n: usize) -> Result<PressureProfile> {
    let lengths = periodic_lengths(schottky, n)?;
    Ok(PressureProfile {
        sigma,
        value: orbit_sum_value(&lengths, sigma, n),
        method: PressureMethod::OrbitSum,
        resolution: n,
    })
}

fn orbit_sum_value(lengths: &[f64], sigma: f64, n: usize) -> f64 {
    // log-sum-exp keeps large σ well conditioned.
    let top = lengths.iter().map(|l| -sigma * l).fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = lengths.iter().map(|l| (-sigma * l - top).exp()).sum();
    (top + sum.ln()) / n as f64
}

/// Result of a pressure root search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub delta: f64,
    /// Every `(σ, P(σ))` evaluated, in evaluation order.
    pub trace: Vec<(f64, f64)>,
}

/// Root of a strictly decreasing function on `[0, 1]`: parallel bracketing to
/// width `1e-3`, then safeguarded secant steps to `tol`.
pub fn decreasing_root<F>(f: F, tol: f64) -> Result<DimensionReport>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let mut trace = Vec::new();
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut flo = f(lo)?;
    trace.push((lo, flo));
    if flo.abs() <= 1e-13 {
        return Ok(DimensionReport { delta: 0.0, trace });
    }
    let mut fhi = f(hi)?;
    trace.push((hi, fhi));
    if !(flo > 0.0 && fhi < 0.0) {
        return Err(Error::BracketFailure { lo, hi });
    }
    const SPLIT: usize = 8;
    while hi - lo > 1e-3 {
        let pts: Vec<f64> = (1..SPLIT).map(|i| lo + (hi - lo) * i as f64 / SPLIT as f64).collect();
        let vals: Vec<f64> = pts.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
        trace.extend(pts.iter().copied().zip(vals.iter().copied()));
        let mut new_lo = (lo, flo);
        let mut new_hi = (hi, fhi);
        for (&x, &v) in pts.iter().zip(&vals) {
            if v > 0.0 {
                new_lo = (x, v);
            } else if new_hi.0 == hi || x < new_hi.0 {
                new_hi = (x, v);
                break;
            }
        }
        (lo, flo) = new_lo;
        (hi, fhi) = new_hi;
        if flo == 0.0 {
            return Ok(DimensionReport { delta: lo, trace });
        }
    }
    // Secant from the bracket ends, falling back to bisection outside it.
    let (mut a, mut fa, mut b, mut fb) = (lo, flo, hi, fhi);
    for _ in 0..100 {
        let mut x = b - fb * (b - a) / (fb - fa);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        trace.push((x, fx));
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let step = (x - b).abs();
        (a, fa, b, fb) = (b, fb, x, fx);
        if step <= tol || fx == 0.0 || hi - lo <= tol {
            return Ok(DimensionReport { delta: x, trace });
        }
    }
    Err(Error::NoConvergence("secant refinement of the pressure root".into()))
}

/// `δ` as the zero of `σ ↦ P(σ)` computed with the eigenvalue method.
pub fn hausdorff_dimension(schottky: &SchottkyData, tol: f64) -> Result<f64> {
    let disc = Discretization::new(schottky, DEFAULT_NODES)?;
    Ok(dimension_report(&disc, tol)?.delta)
}

pub fn dimension_report(disc: &Discretization, tol: f64) -> Result<DimensionReport> {
    decreasing_root(|sigma| pressure_with(disc, sigma).map(|p| p.value), tol)
}

/// `δ` as the zero of the period-`n` orbit-sum pressure.
pub fn orbit_sum_dimension(schottky: &SchottkyData, n: usize, tol: f64) -> Result<f64> {
    let lengths = periodic_lengths(schottky, n)?;
    Ok(decreasing_root(|sigma| Ok(orbit_sum_value(&lengths, sigma, n)), tol)?.delta)
}

/// Normalized weights `w_{a,σ}(x) = φ_σ(γ_a x) γ_a'(x)^σ / (φ_σ(x) e^{N P(σ)})`
/// over `a ∈ W_N^j` for the disk `j` of `x`.
pub fn weights(disc: &Discretization, rpf: &RpfData, x: &LimitPoint, n: usize) -> Result<Vec<(ReducedWord, f64)>> {
    let s = disc.schottky();
    let j = x.disk;
    let phi_x = rpf.phi_at(disc, j, x.x);
    let norm = phi_x * (n as f64 * rpf.pressure).exp();
    let mut out = Vec::new();
    for w in s.enumerate_words(n, WordSet::NotEndingIn(j))? {
        let (value, _) = s.word_derivative_from(&w, j, num_complex::Complex64::new(x.x, 0.0))?;
        let y = s.apply_word_real(&w, x.x);
        let target = s.inverse_letter(w.first().expect("non-empty word"));
        let weight = rpf.phi_at(disc, target, y) * value.re.powf(rpf.sigma) / norm;
        if !(weight > 0.0) {
            return Err(Error::NegativeWeight(weight));
        }
        out.push((w, weight));
    }
    Ok(out)
}

/// `Σ_j Σ_{a ∈ W_N^j} sup_{D_j} |γ_a'|^σ / e^{N P(σ)}` for `N = 1..=max_len`.
pub fn pressure_growth_ratios(schottky: &SchottkyData, sigma: f64, pressure: f64, max_len: usize) -> Result<Vec<f64>> {
    let k = schottky.alphabet();
    let mut out = Vec::with_capacity(max_len);
    for n in 1..=max_len {
        let mut total = 0.0;
        for j in 0..k {
            let d = schottky.disk(j);
            let samples: Vec<num_complex::Complex64> = (0..16)
                .map(|i| {
                    num_complex::Complex64::new(d.center, 0.0)
                        + num_complex::Complex64::from_polar(d.radius, std::f64::consts::TAU * i as f64 / 16.0)
                })
                .collect();
            for w in schottky.enumerate_words(n, WordSet::NotEndingIn(j))? {
                let mut sup: f64 = 0.0;
                for &z in &samples {
                    sup = sup.max(schottky.word_derivative_from(&w, j, z)?.0.norm());
                }
                total += sup.powf(sigma);
            }
        }
        out.push(total / (n as f64 * pressure).exp());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schottky::SurfaceConfig;

    fn funnel(sep: f64) -> SchottkyData {
        SchottkyData::build(&SurfaceConfig::symmetric_funnel(2, sep)).unwrap()
    }

    #[test]
    fn pressure_at_zero_is_log_branching() {
        let s = funnel(1.0);
        let p = pressure_eigen(&s, 0.0, 16).unwrap();
        assert!((p.value - 3.0f64.ln()).abs() < 1e-8);
        let s3 = SchottkyData::build(&SurfaceConfig::symmetric_funnel(3, 1.0)).unwrap();
        assert!((pressure_eigen(&s3, 0.0, 12).unwrap().value - 5.0f64.ln()).abs() < 1e-8);
    }

    #[test]
    fn pressure_is_decreasing_and_refinement_stable() {
        let s = funnel(1.0);
        let a = pressure_eigen(&s, 0.2, 16).unwrap().value;
        let b = pressure_eigen(&s, 0.4, 16).unwrap().value;
        assert!(a > b);
        let c = pressure_eigen(&s, 0.4, 32).unwrap().value;
        assert!((b - c).abs() < 1e-8);
    }

    #[test]
    fn cylinder_pressure_and_dimension() {
        let s = SchottkyData::build(&SurfaceConfig::cylinder(2.0)).unwrap();
        assert!((pressure_eigen(&s, 0.7, 24).unwrap().value + 1.4).abs() < 1e-10);
        assert_eq!(hausdorff_dimension(&s, 1e-10).unwrap(), 0.0);
        // Two period-n points, each with multiplier e^{-nℓ}.
        let p = pressure_orbit_sum(&s, 0.7, 5).unwrap().value;
        assert!((p - (-1.4 + 2.0f64.ln() / 5.0)).abs() < 1e-12);
    }

    #[test]
    fn orbit_sum_counts_periodic_points() {
        let s = funnel(1.0);
        // Cyclically reduced words of length n over 4 letters: 3^n + 1 + (1 + (-1)^n).
        for n in 1..=7 {
            let count = periodic_lengths(&s, n).unwrap().len() as i64;
            assert_eq!(count, 3i64.pow(n as u32) + 2 + (-1i64).pow(n as u32));
        }
    }

    #[test]
    fn orbit_sum_approaches_eigenvalue_pressure() {
        let s = funnel(1.0);
        let eig = pressure_eigen(&s, 0.3, 24).unwrap().value;
        let gaps: Vec<f64> = [4, 7, 10]
            .iter()
            .map(|&n| (pressure_orbit_sum(&s, 0.3, n).unwrap().value - eig).abs())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    }

    #[test]
    fn dimension_decreases_with_separation() {
        let d: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&sep| hausdorff_dimension(&funnel(sep), 1e-10).unwrap())
            .collect();
        assert!(d[0] > d[1] && d[1] > d[2], "{d:?}");
        assert!(d.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn pressure_vanishes_at_dimension() {
        let s = funnel(1.0);
        let delta = hausdorff_dimension(&s, 1e-12).unwrap();
        assert!(pressure_eigen(&s, delta, 24).unwrap().value.abs() < 1e-8);
    }

    #[test]
    fn bracket_failure_is_reported() {
        let r = decreasing_root(|x| Ok(2.0 - x), 1e-10);
        assert!(matches!(r, Err(Error::BracketFailure { .. })));
        let r = decreasing_root(|x| Ok(0.3 - x), 1e-12).unwrap();
        assert!((r.delta - 0.3).abs() < 1e-12);
    }

    #[test]
    fn rpf_eigenfunction_is_positive() {
        let s = funnel(1.0);
        let disc = Discretization::new(&s, 16).unwrap();
        let r = rpf(&disc, 0.5).unwrap();
        assert_eq!(r.eigenfunction[0], 1.0);
        assert!(r.eigenfunction.iter().all(|&x| x > 0.0));
        assert!(r.residual < 1e-9);
        assert!(r.spectral_gap_ratio < 1.0);
    }

    #[test]
    fn single_branch_weight_is_one() {
        let s = SchottkyData::build(&SurfaceConfig::cylinder(2.0)).unwrap();
        let disc = Discretization::new(&s, 32).unwrap();
        let r = rpf(&disc, 0.3).unwrap();
        for p in s.limit_points(3, 5).unwrap() {
            let w = weights(&disc, &r, &p, 1).unwrap();
            assert_eq!(w.len(), 1);
            assert!((w[0].1 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lemma_growth_ratio_is_bounded() {
        let s = funnel(1.0);
        for sigma in [0.0, 0.5, 1.0] {
            let p = pressure_eigen(&s, sigma, 16).unwrap().value;
            let r = pressure_growth_ratios(&s, sigma, p, 6).unwrap();
            let (lo, hi) = r.iter().fold((f64::MAX, 0.0f64), |acc, &v| (acc.0.min(v), acc.1.max(v)));
            assert!(hi / lo < 10.0, "sigma {sigma}: {r:?}");
        }
    }
}
