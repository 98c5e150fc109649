//! Chebyshev nodes and barycentric Lagrange interpolation on real intervals.

use num_complex::Complex64;

/// Chebyshev points of the first kind on `[center - radius, center + radius]`,
/// in increasing order, together with their barycentric weights.
#[derive(Debug, Clone)]
pub struct ChebyshevGrid {
    pub center: f64,
    pub radius: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl ChebyshevGrid {
    pub fn new(center: f64, radius: f64, count: usize) -> Self {
        assert!(count >= 1);
        let n = count as f64;
        let mut nodes = Vec::with_capacity(count);
        let mut weights = Vec::with_capacity(count);
        // k-th root of T_n, listed from the left endpoint.
        for k in 0..count {
            let theta = (2.0 * (count - 1 - k) as f64 + 1.0) * std::f64::consts::PI / (2.0 * n);
            nodes.push(center + radius * theta.cos());
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            weights.push(sign * theta.sin());
        }
        Self {
            center,
            radius,
            nodes,
            weights,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Values of all Lagrange basis polynomials at `x`.
    pub fn basis_at(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.len()];
        for (k, &node) in self.nodes.iter().enumerate() {
            if x == node {
                out[k] = 1.0;
                return out;
            }
        }
        let mut denom = 0.0;
        for (k, (&node, &w)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let t = w / (x - node);
            out[k] = t;
            denom += t;
        }
        for v in &mut out {
            *v /= denom;
        }
        out
    }

    /// Barycentric interpolation of complex node values at `x`.
    pub fn interpolate(&self, values: &[Complex64], x: f64) -> Complex64 {
        debug_assert_eq!(values.len(), self.len());
        let mut num = Complex64::new(0.0, 0.0);
        let mut denom = 0.0;
        for ((&node, &w), &v) in self.nodes.iter().zip(&self.weights).zip(values) {
            if x == node {
                return v;
            }
            let t = w / (x - node);
            num += v * t;
            denom += t;
        }
        num / denom
    }

    /// Same as [`interpolate`](Self::interpolate) for real data.
    pub fn interpolate_real(&self, values: &[f64], x: f64) -> f64 {
        let mut num = 0.0;
        let mut denom = 0.0;
        for ((&node, &w), &v) in self.nodes.iter().zip(&self.weights).zip(values) {
            if x == node {
                return v;
            }
            let t = w / (x - node);
            num += v * t;
            denom += t;
        }
        num / denom
    }
}
