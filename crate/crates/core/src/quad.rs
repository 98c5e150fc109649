//! Adaptive Gauss–Kronrod quadrature along segments of the complex plane.

use num_complex::Complex64;

use crate::{Error, Result};

// 15-point Kronrod extension of the 7-point Gauss–Legendre rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_94,
    0.417_959_183_673_469_4,
];

/// One Gauss–Kronrod panel: the Kronrod value and an error estimate, using
/// the usual QUADPACK rescaling of `|K - G|`.
fn panel<F>(f: &F, a: Complex64, b: Complex64) -> Result<(Complex64, f64)>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let mid = (a + b) * 0.5;
    let half = (b - a) * 0.5;
    let mut values = [Complex64::new(0.0, 0.0); 15];
    values[7] = f(mid)?;
    for i in 0..7 {
        let dz = half * XGK[i];
        values[i] = f(mid - dz)?;
        values[14 - i] = f(mid + dz)?;
    }
    let weight_k = |p: usize| WGK[if p <= 7 { p } else { 14 - p }];
    let kron: Complex64 = values.iter().enumerate().map(|(p, v)| v * weight_k(p)).sum();
    let mut gauss = values[7] * WG[3];
    for i in (1..7).step_by(2) {
        gauss += (values[i] + values[14 - i]) * WG[i / 2];
    }
    let mean = kron * 0.5;
    let resasc: f64 = values.iter().enumerate().map(|(p, v)| weight_k(p) * (v - mean).norm()).sum::<f64>() * half.norm();
    let mut err = ((kron - gauss) * half).norm();
    if resasc > 0.0 && err > 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    Ok((kron * half, err))
}

/// `∫ f(z) dz` along the straight segment from `a` to `b`, bisecting panels
/// until each meets its share of the absolute tolerance.
pub fn integrate_segment<F>(f: &F, a: Complex64, b: Complex64, tol: f64, max_depth: usize) -> Result<Complex64>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let total = (b - a).norm();
    if total == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut sum = Complex64::new(0.0, 0.0);
    let mut stack = vec![(a, b, 0usize)];
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = panel(f, lo, hi)?;
        let share = tol * (hi - lo).norm() / total;
        if err <= share {
            sum += val;
        } else if depth >= max_depth {
            return Err(Error::NoConvergence(format!(
                "quadrature on [{lo}, {hi}] stalled with error {err:.3e}"
            )));
        } else {
            let mid = (lo + hi) * 0.5;
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn polynomials_are_exact() {
        let f = |z: Complex64| Ok(z * z * z - z * 2.0 + 1.0);
        let v = integrate_segment(&f, c(0.0, 0.0), c(1.0, 1.0), 1e-14, 4).unwrap();
        let prim = |z: Complex64| z.powi(4) / 4.0 - z * z + z;
        assert!((v - (prim(c(1.0, 1.0)) - prim(c(0.0, 0.0)))).norm() < 1e-14);
    }

    #[test]
    fn residue_of_a_pole() {
        // Square contour around 0 of 1/z gives 2πi.
        let f = |z: Complex64| Ok(z.inv());
        let corners = [c(-1.0, -1.0), c(1.0, -1.0), c(1.0, 1.0), c(-1.0, 1.0)];
        let mut total = c(0.0, 0.0);
        for k in 0..4 {
            total += integrate_segment(&f, corners[k], corners[(k + 1) % 4], 1e-12, 30).unwrap();
        }
        assert!((total - c(0.0, 2.0 * std::f64::consts::PI)).norm() < 1e-11);
    }

    #[test]
    fn errors_propagate() {
        let f = |_: Complex64| Err(Error::PoleHit);
        assert_eq!(integrate_segment(&f, c(0.0, 0.0), c(1.0, 0.0), 1e-8, 4), Err(Error::PoleHit));
    }
}
