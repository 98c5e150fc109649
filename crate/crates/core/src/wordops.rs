//! Word-summed representation operators `Z(ν) = Σ_{a ∈ Z} ν(γ_a)`, their
//! recursions and spectral closed form, the decay bounds they obey, and
//! twisted averages over `W_N^j`.
//!
//! `W_1(ν)` is the unnormalized sum `Σ_j ν(γ_j)` throughout.

use num_complex::Complex64;
use serde::Serialize;

use crate::groups::{expansion_epsilon, GroupHom, Twist, UnitaryRep};
use crate::linalg::{self, CMatrix, CVector};
use crate::schottky::{reduced_word_count, LimitPoint, SchottkyData, WordSet, DEFAULT_WORD_CAP};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct WordOperator {
    pub n: usize,
    pub set: WordSet,
    pub matrix: CMatrix,
    /// Largest singular value.
    pub norm: f64,
    /// Number of words summed.
    pub count: usize,
}

/// Brute-force `Σ_{a ∈ set} ν(γ_a)` over words of length `n`.
pub fn word_operator(nu: &Twist, set: WordSet, n: usize) -> Result<WordOperator> {
    let m = nu.m();
    let k = 2 * m;
    if n == 0 {
        return Err(Error::InvalidInput("word length must be at least 1".into()));
    }
    let requested = reduced_word_count(m, n);
    if requested > DEFAULT_WORD_CAP {
        return Err(Error::SizeLimit {
            requested,
            cap: DEFAULT_WORD_CAP,
        });
    }
    let (first, last_ok): (Option<usize>, Box<dyn Fn(usize) -> bool>) = match set {
        WordSet::All => (None, Box::new(|_| true)),
        WordSet::NotEndingIn(j) => (None, Box::new(move |l| l != j)),
        WordSet::FirstLast(i, j) => (Some(i), Box::new(move |l| l == j)),
        WordSet::ZSet(l, j) => (Some((l + m) % k), Box::new(move |a| a != j)),
    };
    let d = nu.dim();
    let mut total = CMatrix::zeros(d, d);
    let mut count = 0usize;
    // Per-first-letter partial sums added in letter order keep the result
    // independent of traversal details.
    for a in 0..k {
        if first.is_some_and(|f| f != a) {
            continue;
        }
        let mut partial = CMatrix::zeros(d, d);
        let mut stack: Vec<(usize, usize, CMatrix)> = vec![(a, 1, nu.letter(a).clone())];
        while let Some((last, len, prod)) = stack.pop() {
            if len == n {
                if last_ok(last) {
                    partial += &prod;
                    count += 1;
                }
                continue;
            }
            for b in (0..k).rev() {
                if b != (last + m) % k {
                    stack.push((b, len + 1, &prod * nu.letter(b)));
                }
            }
        }
        total += partial;
    }
    let norm = linalg::op_norm(&total);
    Ok(WordOperator {
        n,
        set,
        matrix: total,
        norm,
        count,
    })
}

/// `W_1(ν) = Σ_j ν(γ_j)`.
pub fn w1(nu: &Twist) -> CMatrix {
    let d = nu.dim();
    (0..2 * nu.m()).fold(CMatrix::zeros(d, d), |acc, j| acc + nu.letter(j))
}

/// `W_0 = I, W_1, ..., W_n` from `W_1² = W_2 + 2m I` and
/// `W_1 W_N = W_{N+1} + (2m - 1) W_{N-1}`.
pub fn wn_recursion(nu: &Twist, n: usize) -> Vec<CMatrix> {
    let d = nu.dim();
    let m = nu.m() as f64;
    let id = linalg::identity(d);
    let a = w1(nu);
    let mut out = vec![id.clone(), a.clone()];
    for k in 1..n {
        let c = if k == 1 { 2.0 * m } else { 2.0 * m - 1.0 };
        let next = &a * &out[k] - &out[k - 1] * Complex64::from(c);
        out.push(next);
    }
    out.truncate(n + 1);
    out
}

/// `ω^± = (λ ± sqrt(λ² - 4(2m - 1))) / 2`.
pub fn omegas(lambda: f64, m: usize) -> (Complex64, Complex64) {
    let q = (2 * m - 1) as f64;
    let disc = Complex64::from(lambda * lambda - 4.0 * q).sqrt();
    ((lambda + disc) / 2.0, (lambda - disc) / 2.0)
}

/// `ξ_N = Σ_{l=0}^N ω+^l ω-^{N-l}`, with `ξ_{-1} = ξ_{-2} = 0`.
pub fn xi(lambda: f64, m: usize, n: i64) -> Complex64 {
    if n < 0 {
        return Complex64::new(0.0, 0.0);
    }
    let (wp, wm) = omegas(lambda, m);
    let q = (2 * m - 1) as f64;
    let np = n as i32;
    if (wp - wm).norm() < 1e-8 * q {
        let w = (wp + wm) / 2.0;
        return w.powi(np) * (n as f64 + 1.0);
    }
    (wp.powi(np + 1) - wm.powi(np + 1)) / (wp - wm)
}

/// Eigenvalues `λ_k` of the self-adjoint `W_1(ν)`.
pub fn w1_eigenvalues(nu: &Twist) -> Vec<f64> {
    linalg::hermitian_eigenvalues(&w1(nu))
}

/// `‖W_N(ν)‖ = max_k |ξ_{k,N} - ξ_{k,N-2}|`.
pub fn wn_norm_closed_form(nu: &Twist, n: usize) -> f64 {
    let m = nu.m();
    w1_eigenvalues(nu)
        .iter()
        .map(|&l| (xi(l, m, n as i64) - xi(l, m, n as i64 - 2)).norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayRow {
    pub n: usize,
    pub words: f64,
    pub wn_norm: f64,
    pub closed_form: f64,
    pub wn_ratio: f64,
    pub a_max_ratio: f64,
    pub reference_quarter: f64,
    pub reference_sixth: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayReport {
    pub epsilon: f64,
    pub eigenvalues: Vec<f64>,
    pub max_abs_lambda: f64,
    pub lambda_bound: f64,
    pub max_abs_omega: f64,
    pub omega_bound: f64,
    pub lambda_bound_holds: bool,
    pub omega_bound_holds: bool,
    pub rows: Vec<DecayRow>,
}

/// Spectral decay bounds for `W_N(ν)` with `ν` pulled back along `h`, and the
/// empirical decay of `W_N(ν)` and `A_N^{i,j}(ν)` for `N <= n_max`.
pub fn verify_decay(h: &GroupHom, nu: &UnitaryRep, n_max: usize) -> Result<DecayReport> {
    let p = nu.trivial_projector();
    let triv = linalg::op_norm(&p);
    if triv > 1e-9 {
        return Err(Error::TrivialComponentPresent(triv));
    }
    let m = h.m();
    let twist = nu.pull_back(h);
    let eps = expansion_epsilon(h);
    let eigenvalues = w1_eigenvalues(&twist);
    let max_abs_lambda = eigenvalues.iter().map(|l| l.abs()).fold(0.0, f64::max);
    let max_abs_omega = eigenvalues
        .iter()
        .map(|&l| {
            let (a, b) = omegas(l, m);
            a.norm().max(b.norm())
        })
        .fold(0.0, f64::max);
    let lambda_bound = 2.0 * m as f64 * (1.0 - eps);
    let omega_bound = (2 * m - 1) as f64 * (-eps / 3.0).exp();
    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let words = reduced_word_count(m, n) as f64;
        let wn = word_operator(&twist, WordSet::All, n)?;
        let mut a_max: f64 = 0.0;
        for i in 0..2 * m {
            for j in 0..2 * m {
                a_max = a_max.max(word_operator(&twist, WordSet::FirstLast(i, j), n)?.norm);
            }
        }
        rows.push(DecayRow {
            n,
            words,
            wn_norm: wn.norm,
            closed_form: wn_norm_closed_form(&twist, n),
            wn_ratio: wn.norm / words,
            a_max_ratio: a_max / words,
            reference_quarter: (-eps * n as f64 / 4.0).exp(),
            reference_sixth: (-eps * n as f64 / 6.0).exp(),
        });
    }
    Ok(DecayReport {
        epsilon: eps,
        eigenvalues,
        max_abs_lambda,
        lambda_bound,
        max_abs_omega,
        omega_bound,
        lambda_bound_holds: max_abs_lambda <= lambda_bound + 1e-9,
        omega_bound_holds: max_abs_omega <= omega_bound + 1e-9,
        rows,
    })
}

/// Averages `E_{a ∈ W_N^j} ν(γ_a)^{-1} f(γ_a x)` split along the invariant
/// vectors of `ν`.
#[derive(Debug, Clone)]
pub struct TwistedAverage {
    pub full: CVector,
    pub trivial_part: CVector,
    pub residual_part: CVector,
}

pub fn twisted_average<F>(
    schottky: &SchottkyData,
    h: &GroupHom,
    nu: &UnitaryRep,
    f: F,
    x: &LimitPoint,
    n: usize,
) -> Result<TwistedAverage>
where
    F: Fn(f64) -> CVector,
{
    let twist = nu.pull_back(h);
    let p = nu.trivial_projector();
    let d = nu.dim();
    let mut full = CVector::zeros(d);
    let mut trivial = CVector::zeros(d);
    let mut residual = CVector::zeros(d);
    let words = schottky.enumerate_words(n, WordSet::NotEndingIn(x.disk))?;
    for w in &words {
        let y = schottky.apply_word_real(w, x.x);
        let v = f(y);
        if v.len() != d {
            return Err(Error::InvalidInput(format!("f returned a vector of length {}, expected {d}", v.len())));
        }
        let pv = &p * &v;
        let inv = twist.word_matrix(w).adjoint();
        full += &inv * &v;
        trivial += &inv * &pv;
        residual += &inv * (&v - &pv);
    }
    let scale = Complex64::from(1.0 / words.len() as f64);
    Ok(TwistedAverage {
        full: full * scale,
        trivial_part: trivial * scale,
        residual_part: residual * scale,
    })
}

/// `‖(1/|G|) Σ_g ν(g)(v ⊗ conj v)‖` against `‖v‖² / sqrt(dim ρ)`.
pub fn schur_bound_check(rho: &UnitaryRep, v: &CVector) -> Result<(f64, f64)> {
    let norm = rho.character_inner(rho).re;
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::NotIrreducible(norm));
    }
    let nu = rho.tensor_conjugate();
    let p = nu.trivial_projector();
    let vv = linalg::kron(
        &CMatrix::from_column_slice(v.len(), 1, v.as_slice()),
        &CMatrix::from_column_slice(v.len(), 1, v.map(|z| z.conj()).as_slice()),
    );
    let lhs = (&p * vv).norm();
    let rhs = v.norm_squared() / (rho.dim() as f64).sqrt();
    Ok((lhs, rhs))
}
