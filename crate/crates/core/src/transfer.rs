//! Collocation discretization of the twisted transfer operator
//!
//! ```text
//! (L_{s,ρ} F)(z) = Σ_{i != j} γ_i'(z)^s ρ(γ_i)^{-1} F(γ_i z),   z ∈ D_j,
//! ```
//!
//! on Chebyshev nodes of the real intervals `I_j = D_j ∩ R`, together with
//! Fredholm determinants, their logarithmic derivatives, unit eigenfunctions
//! and the normalized-operator identity checks.
//!
//! Unknowns are ordered as `(disk j, node k, component α)` with flat index
//! `(j M + k) d + α`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::cheb::ChebyshevGrid;
use crate::groups::Twist;
use crate::linalg::{self, CMatrix, CVector, ONE, ZERO};
use crate::schottky::{LimitPoint, SchottkyData, WordSet};
use crate::thermo;
use crate::{Error, Result};

/// Default number of Chebyshev nodes per interval.
pub const DEFAULT_NODES: usize = 24;

#[derive(Debug, Clone)]
struct Branch {
    /// `log γ_i'(x_{jk})`, real on the real axis.
    log_derivative: f64,
    /// Lagrange basis of interval `i + m` evaluated at `γ_i(x_{jk})`.
    basis: Vec<f64>,
}

/// Geometry of the collocation scheme at a fixed resolution, shared by all
/// `(s, ρ)` evaluations.
#[derive(Debug, Clone)]
pub struct Discretization {
    schottky: SchottkyData,
    nodes: usize,
    grids: Vec<ChebyshevGrid>,
    /// Indexed by `((j M + k) 2m + i)`; `None` when `i == j`.
    branches: Vec<Option<Branch>>,
}

impl Discretization {
    pub fn new(schottky: &SchottkyData, nodes: usize) -> Result<Self> {
        if nodes < 4 {
            return Err(Error::InvalidInput(format!("need at least 4 nodes per interval, got {nodes}")));
        }
        let k2 = schottky.alphabet();
        let grids: Vec<ChebyshevGrid> = schottky
            .disks()
            .iter()
            .map(|d| ChebyshevGrid::new(d.center, d.radius, nodes))
            .collect();
        let mut branches = Vec::with_capacity(k2 * nodes * k2);
        for j in 0..k2 {
            for k in 0..nodes {
                let x = grids[j].nodes[k];
                for i in 0..k2 {
                    if i == j {
                        branches.push(None);
                        continue;
                    }
                    let g = schottky.generator(i);
                    let y = g.apply_real(x);
                    let log_derivative = schottky.letter_log_derivative(i, j, Complex64::new(x, 0.0)).re;
                    let basis = grids[schottky.inverse_letter(i)].basis_at(y);
                    branches.push(Some(Branch { log_derivative, basis }));
                }
            }
        }
        Ok(Self {
            schottky: schottky.clone(),
            nodes,
            grids,
            branches,
        })
    }

    pub fn schottky(&self) -> &SchottkyData {
        &self.schottky
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn grid(&self, disk: usize) -> &ChebyshevGrid {
        &self.grids[disk]
    }

    pub fn grids(&self) -> &[ChebyshevGrid] {
        &self.grids
    }

    /// Matrix size for a twist of dimension `dim`.
    pub fn size(&self, dim: usize) -> usize {
        self.schottky.alphabet() * self.nodes * dim
    }

    fn branch(&self, j: usize, k: usize, i: usize) -> Option<&Branch> {
        let k2 = self.schottky.alphabet();
        self.branches[(j * self.nodes + k) * k2 + i].as_ref()
    }

    fn assemble(&self, s: Complex64, twist: &Twist, with_derivative: bool) -> (CMatrix, Option<CMatrix>) {
        let k2 = self.schottky.alphabet();
        let mm = self.nodes;
        let d = twist.dim();
        let n = self.size(d);
        let mut mat = CMatrix::zeros(n, n);
        let mut der = with_derivative.then(|| CMatrix::zeros(n, n));
        for j in 0..k2 {
            for k in 0..mm {
                let row0 = (j * mm + k) * d;
                for i in 0..k2 {
                    let Some(br) = self.branch(j, k, i) else { continue };
                    let target = self.schottky.inverse_letter(i);
                    // ρ(γ_i)^{-1} = ρ(γ_{i+m})
                    let rinv = twist.letter(target);
                    let w = (s * br.log_derivative).exp();
                    for (k2i, &b) in br.basis.iter().enumerate() {
                        let col0 = (target * mm + k2i) * d;
                        let coef = w * b;
                        for a in 0..d {
                            for c in 0..d {
                                let v = coef * rinv[(a, c)];
                                mat[(row0 + a, col0 + c)] += v;
                                if let Some(der) = der.as_mut() {
                                    der[(row0 + a, col0 + c)] += v * br.log_derivative;
                                }
                            }
                        }
                    }
                }
            }
        }
        (mat, der)
    }

    pub fn transfer(&self, s: Complex64, twist: &Twist) -> TransferMatrix {
        let (matrix, _) = self.assemble(s, twist, false);
        TransferMatrix {
            s,
            dim: twist.dim(),
            nodes: self.nodes,
            matrix,
        }
    }

    /// Transfer matrix and its entrywise `s`-derivative.
    pub fn transfer_with_derivative(&self, s: Complex64, twist: &Twist) -> (TransferMatrix, CMatrix) {
        let (matrix, der) = self.assemble(s, twist, true);
        (
            TransferMatrix {
                s,
                dim: twist.dim(),
                nodes: self.nodes,
                matrix,
            },
            der.expect("derivative requested"),
        )
    }

    /// Untwisted transfer matrix at real `sigma`.
    pub fn real_transfer(&self, sigma: f64) -> DMatrix<f64> {
        let k2 = self.schottky.alphabet();
        let mm = self.nodes;
        let n = k2 * mm;
        let mut mat = DMatrix::zeros(n, n);
        for j in 0..k2 {
            for k in 0..mm {
                let row = j * mm + k;
                for i in 0..k2 {
                    let Some(br) = self.branch(j, k, i) else { continue };
                    let target = self.schottky.inverse_letter(i);
                    let w = (sigma * br.log_derivative).exp();
                    for (k2i, &b) in br.basis.iter().enumerate() {
                        mat[(row, target * mm + k2i)] += w * b;
                    }
                }
            }
        }
        mat
    }

    /// `det(I - L_{s,ρ})` by LU with partial pivoting.
    pub fn fredholm_det(&self, s: Complex64, twist: &Twist) -> Complex64 {
        let t = self.transfer(s, twist);
        linalg::lu_det(&t.identity_minus())
    }

    /// `d/ds log det(I - L) = -tr((I - L)^{-1} dL/ds)`.
    pub fn det_log_derivative(&self, s: Complex64, twist: &Twist) -> Result<Complex64> {
        self.det_and_log_derivative(s, twist).map(|p| p.1)
    }

    pub fn det_and_log_derivative(&self, s: Complex64, twist: &Twist) -> Result<(Complex64, Complex64)> {
        let (t, der) = self.transfer_with_derivative(s, twist);
        let (det, tr) = linalg::det_and_trace_solve(&t.identity_minus(), &der);
        if det == ZERO || !det.is_finite() || !tr.is_finite() {
            return Err(Error::SingularAtPoint(s));
        }
        Ok((det, -tr))
    }

    /// Eigenvector of the transfer matrix for the eigenvalue closest to 1.
    pub fn unit_eigenfunction(&self, s0: Complex64, twist: &Twist, threshold: f64) -> Result<EigenfunctionSample> {
        let t = self.transfer(s0, twist);
        let (mu, mut v) = linalg::eigenpair_near(&t.matrix, ONE, 300)?;
        let residual = (&t.matrix * &v - &v).norm() / v.norm();
        if (mu - ONE).norm() > 0.1 || residual > threshold {
            return Err(Error::NoUnitEigenvalue {
                eigenvalue: mu,
                residual,
            });
        }
        let (imax, _) = v
            .iter()
            .enumerate()
            .fold((0, 0.0), |acc, (i, z)| if z.norm() > acc.1 { (i, z.norm()) } else { acc });
        let pivot = v[imax];
        v /= pivot;
        let rpf = thermo::rpf(self, s0.re)?;
        let d = twist.dim();
        let normalized = CVector::from_fn(v.len(), |r, _| v[r] / rpf.eigenfunction[r / d]);
        Ok(EigenfunctionSample {
            s: s0,
            dim: d,
            nodes: self.nodes,
            values: v,
            eigenvalue: mu,
            residual,
            pressure: rpf.pressure,
            phi: rpf.eigenfunction,
            normalized,
            grids: self.grids.clone(),
        })
    }

    /// `max |e^{-P} φ^{-1} L (φ 1) - 1|` for the untwisted operator at real `sigma`.
    pub fn normalization_residual(&self, sigma: f64) -> Result<f64> {
        let rpf = thermo::rpf(self, sigma)?;
        let l = self.real_transfer(sigma);
        let phi = nalgebra::DVector::from_vec(rpf.eigenfunction.clone());
        let image = &l * &phi;
        let scale = (-rpf.pressure).exp();
        Ok(image
            .iter()
            .zip(phi.iter())
            .map(|(a, p)| (scale * a / p - 1.0).abs())
            .fold(0.0, f64::max))
    }
}

/// Discretized `L_{s,ρ}`.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    pub s: Complex64,
    pub dim: usize,
    pub nodes: usize,
    pub matrix: CMatrix,
}

impl TransferMatrix {
    pub fn identity_minus(&self) -> CMatrix {
        let n = self.matrix.nrows();
        linalg::identity(n) - &self.matrix
    }
}

/// `L_{s,ρ}` for the given data at resolution `nodes`.
pub fn build_transfer(schottky: &SchottkyData, s: Complex64, twist: &Twist, nodes: usize) -> Result<TransferMatrix> {
    Ok(Discretization::new(schottky, nodes)?.transfer(s, twist))
}

pub fn fredholm_det(schottky: &SchottkyData, s: Complex64, twist: &Twist, nodes: usize) -> Result<Complex64> {
    Ok(Discretization::new(schottky, nodes)?.fredholm_det(s, twist))
}

pub fn det_log_derivative(schottky: &SchottkyData, s: Complex64, twist: &Twist, nodes: usize) -> Result<Complex64> {
    Discretization::new(schottky, nodes)?.det_log_derivative(s, twist)
}

/// A 1-eigenfunction of `L_{s,ρ}` sampled at the collocation nodes.
#[derive(Debug, Clone)]
pub struct EigenfunctionSample {
    pub s: Complex64,
    pub dim: usize,
    pub nodes: usize,
    /// `F` at the nodes, gauged so that its largest entry equals 1.
    pub values: CVector,
    pub eigenvalue: Complex64,
    /// `‖L F - F‖ / ‖F‖`.
    pub residual: f64,
    /// `P(σ)` at `σ = Re s`.
    pub pressure: f64,
    /// `φ_σ` at the nodes.
    pub phi: Vec<f64>,
    /// `f = φ_σ^{-1} F` at the nodes.
    pub normalized: CVector,
    grids: Vec<ChebyshevGrid>,
}

impl EigenfunctionSample {
    fn interpolate(&self, data: &CVector, disk: usize, x: f64) -> CVector {
        let m = self.nodes;
        let d = self.dim;
        let grid = &self.grids[disk];
        let basis = grid.basis_at(x);
        CVector::from_fn(d, |a, _| {
            basis
                .iter()
                .enumerate()
                .map(|(k, &b)| data[(disk * m + k) * d + a] * b)
                .sum()
        })
    }

    /// `F(x)` for `x` in interval `disk`.
    pub fn value_at(&self, disk: usize, x: f64) -> CVector {
        self.interpolate(&self.values, disk, x)
    }

    pub fn phi_at(&self, disk: usize, x: f64) -> f64 {
        let m = self.nodes;
        self.grids[disk].interpolate_real(&self.phi[disk * m..(disk + 1) * m], x)
    }

    /// `f(x) = F(x) / φ_σ(x)`.
    pub fn normalized_at(&self, disk: usize, x: f64) -> CVector {
        self.value_at(disk, x) / Complex64::from(self.phi_at(disk, x))
    }

    /// Node of largest `‖f‖`, as `(disk, x)`.
    pub fn argmax_node(&self) -> (usize, f64) {
        let d = self.dim;
        let m = self.nodes;
        let count = self.normalized.len() / d;
        let norm = |p: usize| (0..d).map(|a| self.normalized[p * d + a].norm_sqr()).sum::<f64>();
        let best = (0..count).max_by(|&a, &b| norm(a).partial_cmp(&norm(b)).unwrap()).unwrap_or(0);
        (best / m, self.grids[best / m].nodes[best % m])
    }
}

/// Both sides of `e^{-NP(σ)} f(x) = Σ_{a ∈ W_N^j} w_{a,σ}(x) v_a` at the node
/// maximizing `‖f‖` and at the supplied limit points; returns the largest
/// discrepancy relative to the largest left-hand side.
pub fn convexity_identity_check(
    schottky: &SchottkyData,
    sample: &EigenfunctionSample,
    twist: &Twist,
    n: usize,
    points: &[LimitPoint],
) -> Result<f64> {
    let sigma = sample.s.re;
    let t = sample.s.im;
    let p = sample.pressure;
    let mut tests: Vec<(usize, f64)> = vec![sample.argmax_node()];
    tests.extend(points.iter().map(|lp| (lp.disk, lp.x)));
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (j, x) in tests {
        let lhs = sample.normalized_at(j, x) * Complex64::from((-(n as f64) * p).exp());
        let phi_x = sample.phi_at(j, x);
        let mut rhs = CVector::zeros(sample.dim);
        for w in schottky.enumerate_words(n, WordSet::NotEndingIn(j))? {
            let (_, log_d) = schottky.word_derivative_from(&w, j, Complex64::new(x, 0.0))?;
            let y = schottky.apply_word_real(&w, x);
            let target = schottky.inverse_letter(w.first().expect("non-empty word"));
            let weight = sample.phi_at(target, y) * (sigma * log_d.re).exp() / (phi_x * (n as f64 * p).exp());
            if !(weight > 0.0) {
                return Err(Error::NegativeWeight(weight));
            }
            let phase = (Complex64::new(0.0, t) * log_d).exp();
            let v = twist.word_matrix(&w).adjoint() * sample.normalized_at(target, y) * phase;
            rhs += v * Complex64::from(weight);
        }
        worst = worst.max((&lhs - &rhs).norm());
        scale = scale.max(lhs.norm());
    }
    Ok(if scale > 0.0 { worst / scale } else { worst })
}

/// Empirical Lipschitz seminorm and sup norm over a point sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeminormReport {
    pub seminorm: f64,
    pub sup_norm: f64,
    pub ratio: f64,
}

/// `max |h(x) - h(y)| / |x - y|` over pairs of sample points in a common
/// interval, together with `max |h|`.
pub fn empirical_seminorm<F>(points: &[(usize, f64)], h: F) -> SeminormReport
where
    F: Fn(usize, f64) -> CVector,
{
    let values: Vec<CVector> = points.iter().map(|&(j, x)| h(j, x)).collect();
    let sup_norm = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut seminorm: f64 = 0.0;
    for a in 0..points.len() {
        for b in (a + 1)..points.len() {
            if points[a].0 != points[b].0 || points[a].1 == points[b].1 {
                continue;
            }
            let q = (&values[a] - &values[b]).norm() / (points[a].1 - points[b].1).abs();
            seminorm = seminorm.max(q);
        }
    }
    let ratio = if sup_norm > 0.0 { seminorm / sup_norm } else { 0.0 };
    SeminormReport {
        seminorm,
        sup_norm,
        ratio,
    }
}

/// Seminorm diagnostics of the normalized eigenfunction on limit points.
pub fn seminorm_diagnostics(sample: &EigenfunctionSample, points: &[LimitPoint]) -> SeminormReport {
    let pts: Vec<(usize, f64)> = points.iter().map(|p| (p.disk, p.x)).collect();
    empirical_seminorm(&pts, |j, x| sample.normalized_at(j, x))
}
