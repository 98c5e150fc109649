//! Twisted zeta functions: Euler products, argument-principle zero counting,
//! zero location, Venkov–Zograf factorization checks and scans over covers
//! and characters.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::groups::{expansion_epsilon, irreps, GroupHom, Twist, UnitaryRep};
use crate::linalg;
use crate::quad::integrate_segment;
use crate::schottky::{ClassConvention, SchottkyData};
use crate::thermo;
use crate::transfer::Discretization;
use crate::{Error, Result};

/// Default height cutoff `T_0` of scan rectangles.
pub const DEFAULT_HEIGHT: f64 = 10.0;

const NUDGE: f64 = 1e-4;
const NUDGE_ATTEMPTS: usize = 5;
const WINDING_TOL: f64 = 0.1;
/// Absolute tolerance of the contour integral of the log-derivative.
const CONTOUR_TOL: f64 = 0.2;
/// Longest initial panel along an edge.
const PANEL: f64 = 2.0;

/// Axis-parallel rectangle in the `s`-plane with the resolution used to scan it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRectangle {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    #[serde(default = "default_grid")]
    pub grid_re: usize,
    #[serde(default = "default_grid")]
    pub grid_im: usize,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
}

fn default_grid() -> usize {
    2
}

fn default_nodes() -> usize {
    crate::transfer::DEFAULT_NODES
}

impl ScanRectangle {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let r = Self {
            re_min,
            re_max,
            im_min,
            im_max,
            grid_re: default_grid(),
            grid_im: default_grid(),
            nodes: default_nodes(),
        };
        r.validate()?;
        Ok(r)
    }

    /// `[δ - width, δ] × [-T0, T0]`.
    pub fn strip(delta: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(delta - width, delta, -height, height)
    }

    pub fn with_grid(mut self, grid_re: usize, grid_im: usize) -> Result<Self> {
        self.grid_re = grid_re;
        self.grid_im = grid_im;
        self.validate()?;
        Ok(self)
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.re_min, self.re_max, self.im_min, self.im_max].iter().all(|v| v.is_finite());
        if !finite || self.re_max < self.re_min || self.im_max < self.im_min {
            return Err(Error::InvalidInput(format!("invalid rectangle {self:?}")));
        }
        if self.grid_re < 2 || self.grid_im < 2 {
            return Err(Error::InvalidInput("scan grids need at least 2 points per axis".into()));
        }
        Ok(())
    }

    fn bounds(&self) -> Bounds {
        Bounds {
            re: (self.re_min, self.re_max),
            im: (self.im_min, self.im_max),
        }
    }

    pub fn contains(&self, s: Complex64) -> bool {
        self.bounds().contains(s, 0.0)
    }

    /// The `(grid_re - 1) × (grid_im - 1)` cells between grid lines,
    /// ordered by real part then imaginary part.
    pub fn cells(&self) -> Vec<ScanRectangle> {
        let nr = self.grid_re - 1;
        let ni = self.grid_im - 1;
        let mut out = Vec::with_capacity(nr * ni);
        for a in 0..nr {
            for b in 0..ni {
                let lerp = |lo: f64, hi: f64, t: usize, n: usize| lo + (hi - lo) * t as f64 / n as f64;
                out.push(ScanRectangle {
                    re_min: lerp(self.re_min, self.re_max, a, nr),
                    re_max: lerp(self.re_min, self.re_max, a + 1, nr),
                    im_min: lerp(self.im_min, self.im_max, b, ni),
                    im_max: lerp(self.im_min, self.im_max, b + 1, ni),
                    grid_re: 2,
                    grid_im: 2,
                    nodes: self.nodes,
                });
            }
        }
        out
    }

    /// Grid points `(re, im)` in row-major order (real part outer).
    pub fn grid_points(&self) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.grid_re * self.grid_im);
        for a in 0..self.grid_re {
            for b in 0..self.grid_im {
                let re = self.re_min + (self.re_max - self.re_min) * a as f64 / (self.grid_re - 1) as f64;
                let im = self.im_min + (self.im_max - self.im_min) * b as f64 / (self.grid_im - 1) as f64;
                out.push(Complex64::new(re, im));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Bounds {
    re: (f64, f64),
    im: (f64, f64),
}

impl Bounds {
    fn around(s: Complex64, half: f64) -> Self {
        Self {
            re: (s.re - half, s.re + half),
            im: (s.im - half, s.im + half),
        }
    }

    fn inflate(&self, e: f64) -> Self {
        Self {
            re: (self.re.0 - e, self.re.1 + e),
            im: (self.im.0 - e, self.im.1 + e),
        }
    }

    fn contains(&self, s: Complex64, slack: f64) -> bool {
        s.re >= self.re.0 - slack && s.re <= self.re.1 + slack && s.im >= self.im.0 - slack && s.im <= self.im.1 + slack
    }

    fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re.0 + self.re.1), 0.5 * (self.im.0 + self.im.1))
    }

    fn diameter(&self) -> f64 {
        (self.re.1 - self.re.0).hypot(self.im.1 - self.im.0)
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re.0, self.im.0),
            Complex64::new(self.re.1, self.im.0),
            Complex64::new(self.re.1, self.im.1),
            Complex64::new(self.re.0, self.im.1),
        ]
    }

    /// Splits across the longer side at fraction `t`.
    fn split(&self, t: f64) -> (Bounds, Bounds) {
        if self.re.1 - self.re.0 >= self.im.1 - self.im.0 {
            let x = self.re.0 + t * (self.re.1 - self.re.0);
            (Bounds { re: (self.re.0, x), ..*self }, Bounds { re: (x, self.re.1), ..*self })
        } else {
            let y = self.im.0 + t * (self.im.1 - self.im.0);
            (Bounds { im: (self.im.0, y), ..*self }, Bounds { im: (y, self.im.1), ..*self })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroClass {
    /// Also a zero of the untwisted zeta function.
    Old,
    New,
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Zero {
    pub re: f64,
    pub im: f64,
    pub multiplicity: i64,
    /// Size of the last Newton step.
    pub newton_residual: f64,
    pub class: ZeroClass,
}

impl Zero {
    pub fn s(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceReport {
    pub rectangle: ScanRectangle,
    pub label: String,
    pub zeros: Vec<Zero>,
    pub winding_total: i64,
    pub tol: f64,
}

impl ResonanceReport {
    pub fn max_re(&self) -> Option<f64> {
        self.zeros.iter().map(|z| z.re).reduce(f64::max)
    }

    /// Whether every zero has its conjugate in the report (up to `slack`),
    /// ignoring zeros whose conjugate falls outside the rectangle.
    pub fn conjugate_symmetric(&self, slack: f64) -> bool {
        self.zeros.iter().all(|z| {
            let c = z.s().conj();
            !self.rectangle.bounds().contains(c, -slack)
                || self
                    .zeros
                    .iter()
                    .any(|w| (w.s() - c).norm() <= slack && w.multiplicity == z.multiplicity)
        })
    }
}

/// How the winding number of `det(I - L)` around a box is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContourMethod {
    /// `(1/2πi) ∮ (log det)' ds` by adaptive Gauss–Kronrod on each edge.
    LogDerivative,
    /// Continuous tracking of `arg det` along the edges; needs determinants
    /// only.
    #[default]
    Phase,
}

/// Largest phase increment accepted between neighbouring samples.
const PHASE_STEP: f64 = PI / 4.0;
/// Longest initial step along an edge for phase tracking.
const PHASE_PANEL: f64 = 0.25;
/// Allowed mismatch between interpolated and sampled log det at a midpoint.
const HERMITE_TOL: f64 = 0.3;

fn winding_log_derivative(disc: &Discretization, twist: &Twist, b: &Bounds) -> Result<f64> {
    let f = |s: Complex64| disc.det_log_derivative(s, twist);
    let corners = b.corners();
    let perimeter: f64 = (0..4).map(|e| (corners[(e + 1) % 4] - corners[e]).norm()).sum();
    let mut total = Complex64::new(0.0, 0.0);
    for e in 0..4 {
        let (a, z) = (corners[e], corners[(e + 1) % 4]);
        let pieces = ((z - a).norm() / PANEL).ceil().max(1.0) as usize;
        for p in 0..pieces {
            let lo = a + (z - a) * (p as f64 / pieces as f64);
            let hi = a + (z - a) * ((p + 1) as f64 / pieces as f64);
            total += integrate_segment(&f, lo, hi, CONTOUR_TOL * (hi - lo).norm() / perimeter, 18)?;
        }
    }
    let w = total / Complex64::new(0.0, 2.0 * PI);
    if w.im.abs() > WINDING_TOL {
        return Err(Error::ContourAmbiguity(w.re));
    }
    Ok(w.re)
}

/// Memoized `(det, log det')` evaluations for one twist. Contour points sit on
/// a fixed lattice, so boxes produced by splitting reuse their parent's edges.
struct Sampler<'a> {
    disc: &'a Discretization,
    twist: &'a Twist,
    memo: RefCell<HashMap<(u64, u64), (Complex64, Complex64)>>,
}

impl<'a> Sampler<'a> {
    fn new(disc: &'a Discretization, twist: &'a Twist) -> Self {
        Self {
            disc,
            twist,
            memo: RefCell::new(HashMap::new()),
        }
    }

    fn eval(&self, s: Complex64) -> Result<(Complex64, Complex64)> {
        let key = (s.re.to_bits(), s.im.to_bits());
        if let Some(&v) = self.memo.borrow().get(&key) {
            return Ok(v);
        }
        let v = self.disc.det_and_log_derivative(s, self.twist)?;
        self.memo.borrow_mut().insert(key, v);
        Ok(v)
    }

    fn log_derivative(&self, s: Complex64) -> Result<Complex64> {
        self.eval(s).map(|(_, g)| g)
    }
}

/// Points from `a` to `z` on an axis-parallel edge: the endpoints plus every
/// multiple of `PHASE_PANEL` strictly between them along the edge.
fn edge_points(a: Complex64, z: Complex64) -> Vec<Complex64> {
    let vertical = a.re == z.re;
    let (from, to) = if vertical { (a.im, z.im) } else { (a.re, z.re) };
    let at = |t: f64| if vertical { Complex64::new(a.re, t) } else { Complex64::new(t, a.im) };
    let (lo, hi) = (from.min(to), from.max(to));
    let margin = 1e-3 * PHASE_PANEL;
    let mut inner: Vec<f64> = ((lo / PHASE_PANEL).floor() as i64..=(hi / PHASE_PANEL).ceil() as i64)
        .map(|k| k as f64 * PHASE_PANEL)
        .filter(|&t| t > lo + margin && t < hi - margin)
        .collect();
    if from > to {
        inner.reverse();
    }
    std::iter::once(a).chain(inner.into_iter().map(at)).chain(std::iter::once(z)).collect()
}

/// Winding number of `det(I - L)` around `b` together with the power sums
/// `(1/2πi)∮ w^j (log det)' ds`, `w = (s - c)/r` in box coordinates, which equal
/// the sums of `w^j` over the enclosed zeros.
fn winding_phase(sp: &Sampler, b: &Bounds) -> Result<(f64, Moments)> {
    let (c, r) = (b.center(), 0.5 * b.diameter());
    let powers = |s: Complex64| {
        let w = (s - c) / r;
        let mut out = [w; MOMENTS];
        for j in 1..MOMENTS {
            out[j] = out[j - 1] * w;
        }
        out
    };
    // Each sample carries the determinant and its log-derivative. A panel is
    // accepted only when the cubic Hermite prediction of log det at the
    // midpoint matches, which catches most zeros hiding between samples.
    let sample = |s: Complex64| sp.eval(s);
    let corners = b.corners();
    let mut total = 0.0;
    let mut moments = [Complex64::new(0.0, 0.0); MOMENTS];
    for e in 0..4 {
        let (a, z) = (corners[e], corners[(e + 1) % 4]);
        let points = edge_points(a, z);
        let pieces = points.len() - 1;
        let mut values = Vec::with_capacity(points.len());
        for &s in &points {
            values.push(sample(s)?);
        }
        for p in 0..pieces {
            let mut stack = vec![(points[p], values[p], points[p + 1], values[p + 1], 0usize)];
            while let Some((lo, (dlo, glo), hi, (dhi, ghi), depth)) = stack.pop() {
                let whole = (dhi / dlo).arg();
                let mid = (lo + hi) * 0.5;
                let (dmid, gmid) = sample(mid)?;
                let left = (dmid / dlo).arg();
                let right = (dhi / dmid).arg();
                let l1 = Complex64::new((dhi / dlo).norm().ln(), whole);
                let lm = Complex64::new((dmid / dlo).norm().ln(), left);
                let predicted = l1 * 0.5 + (hi - lo) * (glo - ghi) / 8.0;
                // Simpson's rule on the log-derivative follows the continuous
                // branch, so a full turn hidden between samples shows up here.
                let simpson = (hi - lo) / 6.0 * (glo + gmid * 4.0 + ghi);
                let tame = (predicted - lm).norm() <= HERMITE_TOL && (simpson - l1).norm() <= HERMITE_TOL;
                if tame && left.abs() <= PHASE_STEP && right.abs() <= PHASE_STEP && (left + right - whole).abs() < 1e-9 {
                    total += left + right;
                    let (plo, pmid, phi) = (powers(lo), powers(mid), powers(hi));
                    for j in 0..MOMENTS {
                        moments[j] += (hi - lo) / 6.0 * (plo[j] * glo + pmid[j] * gmid * 4.0 + phi[j] * ghi);
                    }
                } else if depth >= 40 {
                    return Err(Error::NoConvergence(format!("phase tracking stalled near {mid}")));
                } else {
                    stack.push((mid, (dmid, gmid), hi, (dhi, ghi), depth + 1));
                    stack.push((lo, (dlo, glo), mid, (dmid, gmid), depth + 1));
                }
            }
        }
    }
    let twopi_i = Complex64::new(0.0, 2.0 * PI);
    Ok((total / (2.0 * PI), moments.map(|m| m / twopi_i)))
}

/// Number of power sums collected per contour; boxes with at most this many
/// zeros are resolved from them directly.
const MOMENTS: usize = 4;
type Moments = [Complex64; MOMENTS];

/// Roots of the polynomial whose first `k` power sums are `p`, by Newton's
/// identities and a Durand–Kerner iteration.
fn roots_from_power_sums(p: &[Complex64]) -> Vec<Complex64> {
    let k = p.len();
    let mut e = vec![Complex64::new(1.0, 0.0); k + 1];
    for n in 1..=k {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 1..=n {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += e[n - i] * p[i - 1] * sign;
        }
        e[n] = acc / n as f64;
    }
    // Monic coefficients of w^k - e1 w^(k-1) + e2 w^(k-2) - ...
    let eval = |w: Complex64| {
        e.iter().enumerate().fold(Complex64::new(0.0, 0.0), |acc, (i, &c)| {
            acc * w + if i % 2 == 0 { c } else { -c }
        })
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..k).map(|i| seed.powu(i as u32) * 0.5).collect();
    for _ in 0..500 {
        let mut moved: f64 = 0.0;
        for i in 0..k {
            let denom = (0..k).filter(|&j| j != i).fold(Complex64::new(1.0, 0.0), |acc, j| acc * (z[i] - z[j]));
            let step = eval(z[i]) / denom;
            if step.is_finite() {
                z[i] -= step;
                moved = moved.max(step.norm());
            }
        }
        if moved < 1e-14 {
            break;
        }
    }
    z
}

/// Outcome of a contour count: the winding, the contour actually used and,
/// when available, power sums of the enclosed zeros.
#[derive(Debug, Clone, Copy)]
struct Count {
    n: i64,
    bounds: Bounds,
    moments: Option<Moments>,
}

/// Winding count with nudging: on a zero of the determinant near the contour,
/// or a non-integer winding, the box is inflated and retried. Returns the count
/// and the contour actually used.
fn count_in_with(sp: &Sampler, b: &Bounds, method: ContourMethod) -> Result<Count> {
    let mut last = f64::NAN;
    for attempt in 0..=NUDGE_ATTEMPTS {
        let bb = b.inflate(NUDGE * attempt as f64);
        let w = match method {
            ContourMethod::LogDerivative => winding_log_derivative(sp.disc, sp.twist, &bb).map(|w| (w, None)),
            ContourMethod::Phase => winding_phase(sp, &bb).map(|(w, z)| (w, Some(z))),
        };
        match w {
            Ok((w, moments)) => {
                let r = w.round();
                if (w - r).abs() <= WINDING_TOL {
                    return Ok(Count {
                        n: r as i64,
                        bounds: bb,
                        moments,
                    });
                }
                last = w;
            }
            Err(Error::ContourAmbiguity(w)) => last = w,
            Err(Error::SingularAtPoint(_)) | Err(Error::NoConvergence(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Err(Error::ContourAmbiguity(last))
}

fn count_in(sp: &Sampler, b: &Bounds) -> Result<Count> {
    count_in_with(sp, b, ContourMethod::Phase)
}

/// Number of zeros of `det(I - L_{s,ρ})` inside `rect`, with multiplicity, from
/// the contour integral of the log-derivative.
pub fn count_zeros(disc: &Discretization, rect: &ScanRectangle, twist: &Twist) -> Result<i64> {
    count_zeros_with(disc, rect, twist, ContourMethod::LogDerivative)
}

pub fn count_zeros_with(disc: &Discretization, rect: &ScanRectangle, twist: &Twist, method: ContourMethod) -> Result<i64> {
    rect.validate()?;
    Ok(count_in_with(&Sampler::new(disc, twist), &rect.bounds(), method)?.n)
}

/// Newton iteration `s ← s - k / (log det)'(s)` for a zero of multiplicity `k`.
fn newton(sp: &Sampler, start: Complex64, k: i64, tol: f64, leash: f64) -> Result<(Complex64, f64)> {
    let mut s = start;
    let mut step = f64::INFINITY;
    for _ in 0..40 {
        let ld = match sp.log_derivative(s) {
            Ok(v) => v,
            Err(Error::SingularAtPoint(_)) => return Ok((s, 0.0)),
            Err(e) => return Err(e),
        };
        let delta = Complex64::from(k as f64) / ld;
        s -= delta;
        step = delta.norm();
        if !s.is_finite() || (s - start).norm() > leash {
            return Err(Error::NewtonDivergence(start));
        }
        if step <= 1e-3 * tol {
            return Ok((s, step));
        }
    }
    if step <= tol {
        Ok((s, step))
    } else {
        Err(Error::NewtonDivergence(start))
    }
}

const SPLITS: [f64; 3] = [0.4873, 0.5317, 0.4419];
/// Diameter below which Newton with multiplicity is tried on boxes holding
/// more than one zero.
const MULTIPLE_ZERO_BOX: f64 = 0.05;

fn refine(sp: &Sampler, c: Count, tol: f64, depth: usize, out: &mut Vec<Zero>) -> Result<()> {
    let Count { n: count, bounds: b, moments } = c;
    if count == 0 {
        return Ok(());
    }
    let diam = b.diameter();
    let (center, r) = (b.center(), 0.5 * diam);
    if let Some(p) = moments.filter(|_| count as usize <= MOMENTS) {
        if let Some(found) = polish_all(sp, &b, &p[..count as usize], tol) {
            out.extend(found);
            return Ok(());
        }
    }
    // Several zeros in a large box are split first; a multiple zero shows up
    // as a count that survives down to small boxes.
    let start = match moments {
        Some(p) => center + p[0] * r / count as f64,
        None => center,
    };
    let start = if b.contains(start, 0.0) { start } else { center };
    if diam < MULTIPLE_ZERO_BOX {
        if let Ok((s, step)) = newton(sp, start, count, tol, diam) {
            let half = (100.0 * tol).max(1e-6);
            let confirmed = count == 1 || matches!(count_in(sp, &Bounds::around(s, half)), Ok(c) if c.n == count);
            if b.contains(s, 0.0) && confirmed {
                out.push(Zero {
                    re: s.re,
                    im: s.im,
                    multiplicity: count,
                    newton_residual: step,
                    class: ZeroClass::Unclassified,
                });
                return Ok(());
            }
        }
    }
    if diam <= tol || depth > 60 {
        let s = b.center();
        out.push(Zero {
            re: s.re,
            im: s.im,
            multiplicity: count,
            newton_residual: diam,
            class: ZeroClass::Unclassified,
        });
        return Ok(());
    }
    let mut last = None;
    for t in SPLITS {
        let (lo, hi) = b.split(t);
        let c1 = count_in(sp, &lo)?;
        let c2 = count_in(sp, &hi)?;
        if c1.n + c2.n == count {
            refine(sp, c1, tol, depth + 1, out)?;
            refine(sp, c2, tol, depth + 1, out)?;
            return Ok(());
        }
        last = Some((c1, c2));
    }
    // Every split disagrees with the parent. Settle it with the quadrature
    // engine: if it sides with the children, the parent count was wrong.
    let (c1, c2) = last.expect("at least one split");
    let check = count_in_with(sp, &b, ContourMethod::LogDerivative)?;
    if check.n == c1.n + c2.n {
        refine(sp, c1, tol, depth + 1, out)?;
        refine(sp, c2, tol, depth + 1, out)?;
        return Ok(());
    }
    Err(Error::ContourAmbiguity((c1.n + c2.n) as f64))
}

/// Polishes the zeros predicted by the power sums of a box. Succeeds only when
/// every guess converges to its own simple zero inside the box.
fn polish_all(sp: &Sampler, b: &Bounds, p: &[Complex64], tol: f64) -> Option<Vec<Zero>> {
    let (center, r) = (b.center(), 0.5 * b.diameter());
    let mut found: Vec<Zero> = Vec::with_capacity(p.len());
    for w in roots_from_power_sums(p) {
        let (s, step) = newton(sp, center + w * r, 1, tol, 2.0 * r).ok()?;
        let distinct = found.iter().all(|z| (z.s() - s).norm() > (1e3 * tol).max(1e-7));
        if !b.contains(s, 0.0) || !distinct {
            return None;
        }
        found.push(Zero {
            re: s.re,
            im: s.im,
            multiplicity: 1,
            newton_residual: step,
            class: ZeroClass::Unclassified,
        });
    }
    Some(found)
}

/// Zeros of `det(I - L_{s,ρ})` in `rect` to tolerance `tol`, with
/// multiplicities from winding numbers.
pub fn locate_zeros(disc: &Discretization, rect: &ScanRectangle, twist: &Twist, tol: f64) -> Result<ResonanceReport> {
    locate(disc, rect, twist, tol, twist.is_real())
}

/// Half-height of the strip around the real axis that a conjugate-symmetric
/// scan searches directly.
const MIRROR_STRIP: f64 = 0.0137;

/// With `mirrored`, the caller guarantees `det(s̄) = conj det(s)`; on a
/// rectangle symmetric about the real axis only the upper half is searched
/// and the lower zeros are reflected.
fn locate(disc: &Discretization, rect: &ScanRectangle, twist: &Twist, tol: f64, mirrored: bool) -> Result<ResonanceReport> {
    rect.validate()?;
    let sp = Sampler::new(disc, twist);
    let symmetric = mirrored && rect.im_min == -rect.im_max && rect.im_max > 2.0 * MIRROR_STRIP;
    let mut b = rect.bounds();
    if symmetric {
        b.im.0 = -MIRROR_STRIP;
    }
    let c = count_in(&sp, &b)?;
    let mut total = c.n;
    let mut zeros = Vec::new();
    refine(&sp, c, tol, 0, &mut zeros)?;
    if symmetric {
        let reflected: Vec<Zero> = zeros
            .iter()
            .filter(|z| z.im > MIRROR_STRIP)
            .map(|z| Zero { im: -z.im, ..*z })
            .collect();
        total += reflected.iter().map(|z| z.multiplicity).sum::<i64>();
        zeros.extend(reflected);
    }
    zeros.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    Ok(ResonanceReport {
        rectangle: *rect,
        label: twist.label().to_string(),
        zeros,
        winding_total: total,
        tol,
    })
}

/// Truncated Euler product together with a tail estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerProduct {
    pub value: Complex64,
    /// `Σ dim ρ · |e^{-s ℓ}|` over the classes of maximal word length.
    pub tail_estimate: f64,
    pub classes: usize,
}

/// `Π_γ Π_{k <= k_max} det(I - ρ(γ) e^{-(s+k) ℓ(γ)})` over primitive classes of
/// word length at most `max_len`. Requires `Re s >= 1.5 δ + 0.5`.
pub fn zeta_euler(
    schottky: &SchottkyData,
    s: Complex64,
    twist: &Twist,
    max_len: usize,
    k_max: usize,
    convention: ClassConvention,
    delta: f64,
) -> Result<EulerProduct> {
    let bound = 1.5 * delta + 0.5;
    if s.re < bound {
        return Err(Error::ConvergenceDomain { re: s.re, bound });
    }
    let classes = schottky.primitive_classes(max_len, convention)?;
    let d = twist.dim();
    let id = linalg::identity(d);
    let mut value = Complex64::new(1.0, 0.0);
    let mut tail = 0.0;
    for c in &classes {
        let g = twist.word_matrix(&c.representative);
        if c.representative.len() == max_len {
            tail += d as f64 * (-s.re * c.length).exp();
        }
        for k in 0..=k_max {
            let z = (-(s + k as f64) * c.length).exp();
            if z.norm() < 1e-18 {
                break;
            }
            let factor = if d == 1 {
                Complex64::new(1.0, 0.0) - g[(0, 0)] * z
            } else {
                linalg::lu_det(&(&id - &g * z))
            };
            value *= factor;
        }
    }
    Ok(EulerProduct {
        value,
        tail_estimate: tail,
        classes: classes.len(),
    })
}

/// Largest relative gap between `det(I - L_{s, R_G})` and
/// `Π_ρ det(I - L_{s,ρ})^{dim ρ}` over `points`.
pub fn venkov_zograf_check(disc: &Discretization, h: &GroupHom, points: &[Complex64]) -> Result<f64> {
    let reg = UnitaryRep::regular(h.group()).pull_back(h);
    let reps: Vec<(Twist, i32)> = irreps(h.group())?
        .iter()
        .map(|r| (r.pull_back(h), r.dim() as i32))
        .collect();
    let mut worst: f64 = 0.0;
    for &s in points {
        let lhs = disc.fredholm_det(s, &reg);
        let rhs: Complex64 = reps.iter().map(|(t, d)| disc.fredholm_det(s, t).powi(*d)).product();
        worst = worst.max((lhs - rhs).norm() / rhs.norm().max(1e-300));
    }
    Ok(worst)
}

/// Whether `s` is a zero of the untwisted determinant: the small box of
/// half-width `half` around it has nonzero winding.
pub fn is_untwisted_zero(disc: &Discretization, s: Complex64, half: f64) -> Result<bool> {
    let m = disc.schottky().m();
    let trivial = Twist::trivial(m);
    Ok(count_in(&Sampler::new(disc, &trivial), &Bounds::around(s, half))?.n > 0)
}

/// Marks each zero of a twisted report as old (also a zero of the untwisted
/// determinant) or new.
pub fn classify_zeros(disc: &Discretization, report: &mut ResonanceReport) -> Result<()> {
    let half = (10.0 * report.tol).max(1e-6);
    for z in &mut report.zeros {
        z.class = if is_untwisted_zero(disc, z.s(), half)? {
            ZeroClass::Old
        } else {
            ZeroClass::New
        };
    }
    Ok(())
}

/// Zeros of every nontrivial irrep of a cover, with the measured expansion.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverScan {
    pub order: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub reports: Vec<ResonanceReport>,
    /// `δ - max Re` over new zeros, or the rectangle width if there are none.
    pub eta: f64,
}

pub fn new_zero_scan(disc: &Discretization, h: &GroupHom, rect: &ScanRectangle, tol: f64, delta: f64) -> Result<CoverScan> {
    let reps = irreps(h.group())?;
    let reports: Vec<ResonanceReport> = reps
        .par_iter()
        .skip(1)
        .map(|rho| irrep_report(disc, h, rho, rect, tol))
        .collect::<Result<_>>()?;
    Ok(CoverScan::assemble(h, delta, rect, reports))
}

/// Classified zeros of one irrep pulled back along `h`.
pub fn irrep_report(disc: &Discretization, h: &GroupHom, rho: &UnitaryRep, rect: &ScanRectangle, tol: f64) -> Result<ResonanceReport> {
    let twist = rho.pull_back(h);
    // A real character means ρ is equivalent to its conjugate, which makes
    // the determinant conjugate-symmetric.
    let self_conjugate = rho.characters().iter().all(|c| c.im.abs() < 1e-9);
    let mut report = locate(disc, rect, &twist, tol, self_conjugate || twist.is_real())?;
    classify_zeros(disc, &mut report)?;
    Ok(report)
}

impl CoverScan {
    /// Combines per-irrep reports into the scan summary.
    pub fn assemble(h: &GroupHom, delta: f64, rect: &ScanRectangle, reports: Vec<ResonanceReport>) -> Self {
        let max_new = reports
            .iter()
            .flat_map(|r| r.zeros.iter())
            .filter(|z| z.class == ZeroClass::New)
            .map(|z| z.re)
            .reduce(f64::max);
        let eta = match max_new {
            Some(x) => delta - x,
            None => rect.re_max - rect.re_min,
        };
        CoverScan {
            order: h.group().order(),
            epsilon: expansion_epsilon(h),
            delta,
            reports,
            eta,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CharacterScan {
    pub theta: Vec<f64>,
    pub report: ResonanceReport,
    /// `δ - max Re` over the zeros found, or the rectangle width if none.
    pub gap: f64,
    /// A zero within `10 tol` of `δ` on the real axis was found.
    pub critical_zero: bool,
}

pub fn character_zeta_scan(
    disc: &Discretization,
    thetas: &[Vec<f64>],
    rect: &ScanRectangle,
    tol: f64,
    delta: f64,
) -> Result<Vec<CharacterScan>> {
    thetas
        .par_iter()
        .map(|theta| {
            let twist = Twist::abelianization_character(theta);
            let report = locate_zeros(disc, rect, &twist, tol)?;
            let gap = match report.max_re() {
                Some(x) => delta - x,
                None => rect.re_max - rect.re_min,
            };
            let critical_zero = report
                .zeros
                .iter()
                .any(|z| (z.s() - Complex64::from(delta)).norm() <= (10.0 * tol).max(1e-6));
            Ok(CharacterScan {
                theta: theta.clone(),
                report,
                gap,
                critical_zero,
            })
        })
        .collect()
}

/// `(re, im, |det|, arg det)` on the rectangle's grid.
pub fn det_grid(disc: &Discretization, twist: &Twist, rect: &ScanRectangle) -> Vec<(f64, f64, f64, f64)> {
    rect.grid_points()
        .par_iter()
        .map(|&s| {
            let d = disc.fredholm_det(s, twist);
            (s.re, s.im, d.norm(), d.arg())
        })
        .collect()
}

/// Dimension and the real zero of the untwisted determinant near it.
pub fn real_zero_near(disc: &Discretization, guess: f64, tol: f64) -> Result<f64> {
    let twist = Twist::trivial(disc.schottky().m());
    let (s, _) = newton(&Sampler::new(disc, &twist), Complex64::from(guess), 1, tol, 0.5)?;
    Ok(s.re)
}

/// `δ` from the eigenvalue pressure at the discretization's resolution.
pub fn dimension(disc: &Discretization) -> Result<f64> {
    Ok(thermo::dimension_report(disc, 1e-12)?.delta)
}

/// Untwisted determinant values, for callers holding only a matrix size budget.
pub fn untwisted_det(disc: &Discretization, s: Complex64) -> Complex64 {
    disc.fredholm_det(s, &Twist::trivial(disc.schottky().m()))
}
