//! Schottky data, Möbius actions and reduced-word combinatorics.
//!
//! Letters are 0-based: generator `j + m` is the inverse of generator `j`,
//! indices taken mod `2m`. Generator `j` maps the exterior of disk `j` onto
//! the interior of disk `j + m`. For a word `a = a_1 ... a_N` the map
//! `γ_a = γ_{a_1} ∘ ... ∘ γ_{a_N}` sends the closure of disk `j` into disk
//! `a_1 + m` whenever `a_N != j`.

use std::cmp::Ordering;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default cap on the number of words any enumeration may visit.
pub const DEFAULT_WORD_CAP: u128 = 10_000_000;

const DET_TOL: f64 = 1e-9;
const BOUNDARY_TOL: f64 = 1e-9;
const BOUNDARY_SAMPLES: usize = 32;

/// A real 2×2 matrix acting by fractional linear transformations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mobius {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Mobius {
    pub const IDENTITY: Mobius = Mobius {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn from_array(m: [f64; 4]) -> Self {
        Self::new(m[0], m[1], m[2], m[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.a, self.b, self.c, self.d]
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    /// Inverse of a unit-determinant matrix.
    pub fn inverse(&self) -> Self {
        Self::new(self.d, -self.b, -self.c, self.a)
    }

    /// Matrix product `self * other`, i.e. the map `self ∘ other`.
    pub fn compose(&self, other: &Mobius) -> Self {
        Self::new(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )
    }

    pub fn apply(&self, z: Complex64) -> Result<Complex64> {
        mobius_apply(self, z)
    }

    pub fn apply_real(&self, x: f64) -> f64 {
        (self.a * x + self.b) / (self.c * x + self.d)
    }

    /// `g'(z) = (cz + d)^-2` for unit determinant.
    pub fn derivative(&self, z: Complex64) -> Complex64 {
        let w = z * self.c + self.d;
        (w * w).inv()
    }

    /// Attracting fixed point on the real line of a hyperbolic element.
    pub fn attracting_fixed_point(&self) -> Option<f64> {
        let tr = self.trace();
        if tr.abs() <= 2.0 {
            return None;
        }
        let amd = self.a - self.d;
        if self.c == 0.0 {
            // Fixed points b/(d - a) and infinity; the finite one attracts iff |a| < |d|.
            if self.a.abs() < self.d.abs() {
                return Some(self.b / (self.d - self.a));
            }
            return None;
        }
        let disc = (amd * amd + 4.0 * self.b * self.c).sqrt();
        let candidates = [(amd + disc) / (2.0 * self.c), (amd - disc) / (2.0 * self.c)];
        candidates
            .into_iter()
            .find(|&x| (self.c * x + self.d).abs() > 1.0)
    }
}

/// `(az + b)/(cz + d)`.
pub fn mobius_apply(g: &Mobius, z: Complex64) -> Result<Complex64> {
    let den = z * g.c + g.d;
    if den.norm() == 0.0 {
        return Err(Error::PoleHit);
    }
    Ok((z * g.a + g.b) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: f64,
    pub radius: f64,
}

impl Disk {
    pub fn contains(&self, z: Complex64, slack: f64) -> bool {
        (z - self.center).norm() <= self.radius + slack
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.center - self.radius, self.center + self.radius)
    }
}

/// Surface description, as read from configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SurfaceConfig {
    Explicit {
        /// Either `m` matrices (inverses are derived) or all `2m`.
        matrices: Vec<[f64; 4]>,
        disks: Vec<Disk>,
    },
    Preset(Preset),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "kebab-case")]
pub enum Preset {
    /// Elementary group generated by one hyperbolic element of displacement `length`.
    Cylinder { length: f64 },
    /// Genus-zero surface with `m + 1` funnels: unit disks in nested pairs,
    /// adjacent disks separated by gaps of width `separation`.
    SymmetricFunnel {
        #[serde(default = "default_funnel_m")]
        m: usize,
        separation: f64,
    },
    /// Three-funnel surface with integer generators `[[3, 8], [1, 3]]` and
    /// `[[2, 1], [3, 2]]`; they reduce onto `SL_2(F_q)` for `q` in 2, 3, 5.
    Sl2zFunnel,
}

fn default_funnel_m() -> usize {
    2
}

impl SurfaceConfig {
    pub fn cylinder(length: f64) -> Self {
        SurfaceConfig::Preset(Preset::Cylinder { length })
    }

    pub fn symmetric_funnel(m: usize, separation: f64) -> Self {
        SurfaceConfig::Preset(Preset::SymmetricFunnel { m, separation })
    }

    pub fn sl2z_funnel() -> Self {
        SurfaceConfig::Preset(Preset::Sl2zFunnel)
    }
}

/// Validated Schottky data: `2m` generators and `2m` disjoint real-centered disks.
#[derive(Debug, Clone, PartialEq)]
pub struct SchottkyData {
    m: usize,
    generators: Vec<Mobius>,
    disks: Vec<Disk>,
    /// `branch_sign[i * 2m + j]`: sign of `c_i x + d_i` on disk `j` (`i != j`).
    branch_sign: Vec<f64>,
}

impl SchottkyData {
    /// Builds and validates Schottky data from a surface description.
    pub fn build(config: &SurfaceConfig) -> Result<Self> {
        match config {
            SurfaceConfig::Explicit { matrices, disks } => {
                let mats: Vec<Mobius> = matrices.iter().map(|m| Mobius::from_array(*m)).collect();
                Self::new(mats, disks.clone())
            }
            SurfaceConfig::Preset(Preset::Cylinder { length }) => {
                if !(*length > 0.0) || !length.is_finite() {
                    return Err(Error::InvalidInput(format!("cylinder length must be positive, got {length}")));
                }
                // Conjugate of diag(e^{l/2}, e^{-l/2}) with fixed points ±1; the
                // disks are its isometric circles.
                let (ch, sh) = ((length / 2.0).cosh(), (length / 2.0).sinh());
                let g = Mobius::new(ch, sh, sh, ch);
                let r = 1.0 / sh;
                let x = ch / sh;
                Self::new(
                    vec![g],
                    vec![Disk { center: -x, radius: r }, Disk { center: x, radius: r }],
                )
            }
            SurfaceConfig::Preset(Preset::SymmetricFunnel { m, separation }) => {
                let m = *m;
                if m == 0 || !(*separation > 0.0) {
                    return Err(Error::InvalidInput("symmetric funnel needs m >= 1 and separation > 0".into()));
                }
                let pitch = 2.0 + separation;
                let slot = |k: usize| (k as f64 - (2 * m - 1) as f64 / 2.0) * pitch;
                let mut disks = vec![Disk { center: 0.0, radius: 1.0 }; 2 * m];
                for j in 0..m {
                    disks[j].center = slot(j);
                    disks[j + m].center = slot(2 * m - 1 - j);
                }
                let gens = (0..m)
                    .map(|j| pairing_map(disks[j].center, disks[j + m].center, 1.0))
                    .collect();
                Self::new(gens, disks)
            }
            SurfaceConfig::Preset(Preset::Sl2zFunnel) => {
                let disks = vec![
                    Disk { center: -3.0, radius: 1.0 },
                    Disk { center: -2.0 / 3.0, radius: 1.0 / 3.0 },
                    Disk { center: 3.0, radius: 1.0 },
                    Disk { center: 2.0 / 3.0, radius: 1.0 / 3.0 },
                ];
                Self::new(
                    vec![Mobius::new(3.0, 8.0, 1.0, 3.0), Mobius::new(2.0, 1.0, 3.0, 2.0)],
                    disks,
                )
            }
        }
    }

    /// Validates explicit data. `generators` holds either `m` or `2m` matrices.
    pub fn new(generators: Vec<Mobius>, disks: Vec<Disk>) -> Result<Self> {
        let two_m = disks.len();
        if two_m == 0 || two_m % 2 != 0 {
            return Err(Error::InvalidInput(format!("need an even, positive number of disks, got {two_m}")));
        }
        let m = two_m / 2;
        for (i, g) in generators.iter().enumerate() {
            if (g.det() - 1.0).abs() > DET_TOL {
                return Err(Error::NonUnitDeterminant(i, g.det()));
            }
        }
        let generators = if generators.len() == m {
            let mut all = generators.clone();
            all.extend(generators.iter().map(Mobius::inverse));
            all
        } else if generators.len() == two_m {
            for j in 0..m {
                let p = generators[j + m].compose(&generators[j]);
                let defect = [p.a - 1.0, p.b, p.c, p.d - 1.0].iter().map(|v| v.abs()).fold(0.0, f64::max);
                if defect > 1e-12 * generators[j].to_array().iter().map(|v| v.abs()).fold(1.0, f64::max).powi(2) {
                    return Err(Error::InvalidInput(format!("generator {} is not the inverse of generator {j}", j + m)));
                }
            }
            generators
        } else {
            return Err(Error::InvalidInput(format!(
                "expected {m} or {two_m} matrices for {two_m} disks, got {}",
                generators.len()
            )));
        };
        for d in &disks {
            if !(d.radius > 0.0) || !d.radius.is_finite() || !d.center.is_finite() {
                return Err(Error::InvalidInput(format!("invalid disk {d:?}")));
            }
        }
        for i in 0..two_m {
            for j in (i + 1)..two_m {
                if (disks[i].center - disks[j].center).abs() <= disks[i].radius + disks[j].radius {
                    return Err(Error::OverlappingDisks(i, j));
                }
            }
        }
        for j in 0..two_m {
            let target = (j + m) % two_m;
            let g = &generators[j];
            let src = disks[j];
            let dst = disks[target];
            let mut deviation: f64 = 0.0;
            for k in 0..BOUNDARY_SAMPLES {
                let theta = 2.0 * PI * (k as f64 + 0.5) / BOUNDARY_SAMPLES as f64;
                let z = Complex64::new(src.center, 0.0) + Complex64::from_polar(src.radius, theta);
                let w = match mobius_apply(g, z) {
                    Ok(w) => w,
                    Err(_) => {
                        deviation = f64::INFINITY;
                        break;
                    }
                };
                deviation = deviation.max(((w - dst.center).norm() - dst.radius).abs() / dst.radius.max(1.0));
            }
            // The image of infinity must land inside the target disk (exterior -> interior).
            let inside = g.c != 0.0 && ((g.a / g.c) - dst.center).abs() < dst.radius;
            if deviation > BOUNDARY_TOL || !inside {
                return Err(Error::MappingMismatch {
                    generator: j,
                    target,
                    deviation,
                });
            }
        }
        let mut branch_sign = vec![0.0; two_m * two_m];
        for i in 0..two_m {
            let g = &generators[i];
            for j in 0..two_m {
                if i == j {
                    continue;
                }
                let at_center = g.c * disks[j].center + g.d;
                if at_center.abs() - g.c.abs() * disks[j].radius <= 1e-12 * at_center.abs().max(1.0) {
                    return Err(Error::BranchObstruction { letter: i, disk: j });
                }
                branch_sign[i * two_m + j] = at_center.signum();
            }
        }
        Ok(Self {
            m,
            generators,
            disks,
            branch_sign,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn alphabet(&self) -> usize {
        2 * self.m
    }

    pub fn generators(&self) -> &[Mobius] {
        &self.generators
    }

    pub fn generator(&self, j: usize) -> &Mobius {
        &self.generators[j]
    }

    pub fn disks(&self) -> &[Disk] {
        &self.disks
    }

    pub fn disk(&self, j: usize) -> &Disk {
        &self.disks[j]
    }

    pub fn inverse_letter(&self, j: usize) -> usize {
        (j + self.m) % (2 * self.m)
    }

    /// Generators with integer entries, if every entry is an integer.
    pub fn integer_generators(&self) -> Option<Vec<[i64; 4]>> {
        self.generators
            .iter()
            .map(|g| {
                let arr = g.to_array();
                if arr.iter().all(|v| v.fract() == 0.0 && v.abs() < 1e15) {
                    Some(arr.map(|v| v as i64))
                } else {
                    None
                }
            })
            .collect()
    }

    /// Index of the disk containing `z`, if any.
    pub fn disk_of(&self, z: Complex64) -> Option<usize> {
        self.disks.iter().position(|d| d.contains(z, 1e-12 * d.radius))
    }

    /// Sign making `±(c_i z + d_i)` lie in the right half plane for `z` in disk `j`.
    pub fn branch_sign(&self, letter: usize, disk: usize) -> f64 {
        self.branch_sign[letter * 2 * self.m + disk]
    }

    /// `log γ_i'(z)` for `z` in disk `disk != letter`, on the branch that is
    /// real on the real axis.
    pub fn letter_log_derivative(&self, letter: usize, disk: usize, z: Complex64) -> Complex64 {
        let g = &self.generators[letter];
        let w = (z * g.c + g.d) * self.branch_sign(letter, disk);
        -2.0 * w.ln()
    }

    /// Matrix of `γ_w`.
    pub fn word_matrix(&self, w: &ReducedWord) -> Mobius {
        w.letters
            .iter()
            .fold(Mobius::IDENTITY, |acc, &l| acc.compose(&self.generators[l]))
    }

    /// Applies `γ_w` letter by letter (last letter first).
    pub fn apply_word(&self, w: &ReducedWord, z: Complex64) -> Result<Complex64> {
        let mut z = z;
        for &l in w.letters.iter().rev() {
            z = mobius_apply(&self.generators[l], z)?;
        }
        Ok(z)
    }

    pub fn apply_word_real(&self, w: &ReducedWord, x: f64) -> f64 {
        w.letters
            .iter()
            .rev()
            .fold(x, |x, &l| self.generators[l].apply_real(x))
    }

    /// `γ_w'(z)` by the chain rule together with a branch of its logarithm.
    ///
    /// `z` must lie in a closed disk `j` different from the last letter of `w`.
    pub fn word_derivative(&self, w: &ReducedWord, z: Complex64) -> Result<(Complex64, Complex64)> {
        let disk = self
            .disk_of(z)
            .ok_or_else(|| Error::InvalidInput(format!("{z} lies in no Schottky disk")))?;
        self.word_derivative_from(w, disk, z)
    }

    /// Like [`word_derivative`](Self::word_derivative) with the starting disk given.
    pub fn word_derivative_from(&self, w: &ReducedWord, disk: usize, z: Complex64) -> Result<(Complex64, Complex64)> {
        let mut value = Complex64::new(1.0, 0.0);
        let mut log = Complex64::new(0.0, 0.0);
        let mut z = z;
        let mut disk = disk;
        for &l in w.letters.iter().rev() {
            if l == disk {
                return Err(Error::InvalidInput(format!("letter {l} is not admissible on disk {disk}")));
            }
            value *= self.generators[l].derivative(z);
            log += self.letter_log_derivative(l, disk, z);
            z = mobius_apply(&self.generators[l], z)?;
            disk = self.inverse_letter(l);
        }
        Ok((value, log))
    }

    /// Exact enumeration of reduced words of length `n` in lexicographic order.
    pub fn enumerate_words(&self, n: usize, set: WordSet) -> Result<Vec<ReducedWord>> {
        self.enumerate_words_capped(n, set, DEFAULT_WORD_CAP)
    }

    pub fn enumerate_words_capped(&self, n: usize, set: WordSet, cap: u128) -> Result<Vec<ReducedWord>> {
        enumerate_reduced_words(self.m, n, set, cap)
    }

    /// Attracting fixed points of cyclically reduced words of length `depth`.
    pub fn limit_points(&self, depth: usize, per_disk: usize) -> Result<Vec<LimitPoint>> {
        if depth == 0 {
            return Err(Error::InvalidInput("depth must be at least 1".into()));
        }
        let k = self.alphabet();
        let mut per = vec![0usize; k];
        let mut out: Vec<LimitPoint> = Vec::new();
        if per_disk == 0 {
            return Ok(out);
        }
        for w in self.enumerate_words(depth, WordSet::All)? {
            if !w.is_cyclically_reduced(self.m) {
                continue;
            }
            let disk = self.inverse_letter(w.letters[0]);
            if per[disk] >= per_disk {
                continue;
            }
            let g = self.word_matrix(&w);
            let Some(mut x) = g.attracting_fixed_point() else {
                continue;
            };
            for _ in 0..4 {
                x = self.apply_word_real(&w, x);
            }
            if (self.apply_word_real(&w, x) - x).abs() > 1e-12 {
                continue;
            }
            if out.iter().any(|p| (p.x - x).abs() <= 1e-12) {
                continue;
            }
            per[disk] += 1;
            out.push(LimitPoint { x, witness: w, disk });
            if per.iter().all(|&c| c >= per_disk) {
                break;
            }
        }
        out.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap());
        Ok(out)
    }

    /// One representative per conjugacy class of primitive hyperbolic elements
    /// of word length at most `max_len`, sorted by geodesic length.
    pub fn primitive_classes(&self, max_len: usize, convention: ClassConvention) -> Result<Vec<PrimitiveClass>> {
        if max_len == 0 {
            return Err(Error::InvalidInput("maximal word length must be at least 1".into()));
        }
        let requested: u128 = (1..=max_len).map(|n| reduced_word_count(self.m, n)).sum();
        if requested > DEFAULT_WORD_CAP {
            return Err(Error::SizeLimit {
                requested,
                cap: DEFAULT_WORD_CAP,
            });
        }
        let k = self.alphabet();
        let m = self.m;
        let mut out = Vec::new();
        let mut buf = Vec::with_capacity(max_len);
        for n in 1..=max_len {
            for a in 0..k {
                buf.clear();
                buf.push(a);
                // A canonical representative starts with its smallest letter.
                dfs_words_min_first(m, n, &mut buf, &mut |letters: &[usize]| {
                    let w = ReducedWord { letters: letters.to_vec() };
                    if !w.is_cyclically_reduced(m) || !is_strictly_minimal_rotation(letters) {
                        return;
                    }
                    if convention == ClassConvention::MergeInverses {
                        let inv = canonical_rotation(&w.inverse(m).letters);
                        if inv.as_slice() < letters {
                            return;
                        }
                    }
                    let tr = self.word_matrix(&w).trace();
                    let length = 2.0 * (tr.abs() / 2.0).acosh();
                    out.push(PrimitiveClass { representative: w, length });
                });
            }
        }
        out.sort_by(|a, b| {
            a.length
                .partial_cmp(&b.length)
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.representative.letters.cmp(&b.representative.letters))
        });
        Ok(out)
    }

    /// Sample of points per disk used by the distortion diagnostics: the
    /// center, boundary points, and interior points.
    fn disk_samples(&self, j: usize) -> Vec<Complex64> {
        let d = self.disks[j];
        let mut pts = vec![Complex64::new(d.center, 0.0)];
        for k in 0..16 {
            let theta = 2.0 * PI * k as f64 / 16.0;
            pts.push(Complex64::new(d.center, 0.0) + Complex64::from_polar(d.radius, theta));
            pts.push(Complex64::new(d.center, 0.0) + Complex64::from_polar(0.5 * d.radius, theta));
        }
        pts
    }

    /// Measured uniform-hyperbolicity and bounded-distortion constants over
    /// word lengths `1..=max_len`.
    pub fn distortion_diagnostics(&self, max_len: usize) -> Result<DistortionReport> {
        let k = self.alphabet();
        let mut sup_by_len = Vec::with_capacity(max_len);
        let mut distortion: f64 = 1.0;
        for n in 1..=max_len {
            let mut sup: f64 = 0.0;
            for j in 0..k {
                let samples = self.disk_samples(j);
                for w in self.enumerate_words(n, WordSet::NotEndingIn(j))? {
                    let mut lo = f64::INFINITY;
                    let mut hi: f64 = 0.0;
                    for &z in &samples {
                        let (v, _) = self.word_derivative_from(&w, j, z)?;
                        lo = lo.min(v.norm());
                        hi = hi.max(v.norm());
                    }
                    sup = sup.max(hi);
                    distortion = distortion.max(hi / lo);
                }
            }
            sup_by_len.push(sup);
        }
        // Least-squares slope of log sup against N.
        let n = sup_by_len.len() as f64;
        let xs: Vec<f64> = (1..=max_len).map(|v| v as f64).collect();
        let ys: Vec<f64> = sup_by_len.iter().map(|v| v.ln()).collect();
        let mx = xs.iter().sum::<f64>() / n;
        let my = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let theta = if sxx > 0.0 { (sxy / sxx).exp() } else { sup_by_len[0] };
        Ok(DistortionReport {
            sup_derivative: sup_by_len,
            theta,
            distortion,
        })
    }
}

/// `γ = [[b/r, -r - ab/r], [1/r, -a/r]]`, i.e. `z ↦ b - r²/(z - a)`: maps the
/// exterior of the radius-`r` disk at `a` onto the interior of the one at `b`.
fn pairing_map(a: f64, b: f64, r: f64) -> Mobius {
    Mobius::new(b / r, -r - a * b / r, 1.0 / r, -a / r)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistortionReport {
    /// `sup |γ_a'|` over sampled points of `D_j` and all `a ∈ W_N^j`, indexed by `N - 1`.
    pub sup_derivative: Vec<f64>,
    /// Fitted geometric contraction rate.
    pub theta: f64,
    /// Largest observed `|γ_a'(z1) / γ_a'(z2)|`.
    pub distortion: f64,
}

fn dfs_words(m: usize, n: usize, buf: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if buf.len() == n {
        visit(buf);
        return;
    }
    let k = 2 * m;
    let last = *buf.last().unwrap();
    for a in 0..k {
        if a == (last + m) % k {
            continue;
        }
        buf.push(a);
        dfs_words(m, n, buf, visit);
        buf.pop();
    }
}

fn dfs_words_min_first(m: usize, n: usize, buf: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
    if buf.len() == n {
        visit(buf);
        return;
    }
    let k = 2 * m;
    let first = buf[0];
    let last = *buf.last().unwrap();
    for a in first..k {
        if a == (last + m) % k {
            continue;
        }
        buf.push(a);
        dfs_words_min_first(m, n, buf, visit);
        buf.pop();
    }
}

fn is_strictly_minimal_rotation(w: &[usize]) -> bool {
    let n = w.len();
    (1..n).all(|r| {
        let rotated = w[r..].iter().chain(&w[..r]);
        w.iter().cmp(rotated) == Ordering::Less
    })
}

fn canonical_rotation(w: &[usize]) -> Vec<usize> {
    let n = w.len();
    (0..n)
        .map(|r| w[r..].iter().chain(&w[..r]).cloned().collect::<Vec<_>>())
        .min()
        .unwrap()
}

/// Reduced words of length `n` over `2m` letters satisfying `set`, in
/// lexicographic order.
pub fn enumerate_reduced_words(m: usize, n: usize, set: WordSet, cap: u128) -> Result<Vec<ReducedWord>> {
    let k = 2 * m;
    if n == 0 {
        return Err(Error::InvalidInput("word length must be at least 1".into()));
    }
    set.validate(k)?;
    let requested = reduced_word_count(m, n);
    if requested > cap {
        return Err(Error::SizeLimit { requested, cap });
    }
    let first: Option<usize> = match set {
        WordSet::FirstLast(i, _) => Some(i),
        WordSet::ZSet(l, _) => Some((l + m) % k),
        _ => None,
    };
    let mut out = Vec::new();
    let mut buf = Vec::with_capacity(n);
    let mut visit = |letters: &[usize]| {
        if set.accepts_last(*letters.last().unwrap()) {
            out.push(ReducedWord { letters: letters.to_vec() });
        }
    };
    for a in 0..k {
        if first.is_some_and(|f| f != a) {
            continue;
        }
        buf.clear();
        buf.push(a);
        dfs_words(m, n, &mut buf, &mut visit);
    }
    Ok(out)
}

/// `|W_N| = 2m (2m - 1)^(N - 1)`.
pub fn reduced_word_count(m: usize, n: usize) -> u128 {
    if n == 0 {
        return 1;
    }
    let k = 2 * m as u128;
    k * (k - 1).pow(n as u32 - 1)
}

/// Word-set constraints used throughout the word machinery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WordSet {
    /// `W_N`.
    All,
    /// `W_N^j`: last letter different from `j`.
    NotEndingIn(usize),
    /// `A_N^{i,j}`: first letter `i`, last letter `j`.
    FirstLast(usize, usize),
    /// `Z_N^{l,j}`: first letter `l + m`, last letter different from `j`.
    ZSet(usize, usize),
}

impl WordSet {
    fn validate(&self, k: usize) -> Result<()> {
        let ok = match *self {
            WordSet::All => true,
            WordSet::NotEndingIn(j) => j < k,
            WordSet::FirstLast(i, j) | WordSet::ZSet(i, j) => i < k && j < k,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("letter index out of range in {self:?}")))
        }
    }

    fn accepts_last(&self, last: usize) -> bool {
        match *self {
            WordSet::All => true,
            WordSet::NotEndingIn(j) | WordSet::ZSet(_, j) => last != j,
            WordSet::FirstLast(_, j) => last == j,
        }
    }
}

/// Whether `γ` and `γ^{-1}` count as one class or two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassConvention {
    Oriented,
    MergeInverses,
}

/// A cancellation-free word over the alphabet `0..2m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReducedWord {
    letters: Vec<usize>,
}

impl ReducedWord {
    pub fn new(letters: Vec<usize>, m: usize) -> Result<Self> {
        let k = 2 * m;
        if let Some(&bad) = letters.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidInput(format!("letter {bad} outside alphabet of size {k}")));
        }
        if letters.windows(2).any(|p| p[0] == (p[1] + m) % k) {
            return Err(Error::InvalidInput(format!("word {letters:?} is not reduced")));
        }
        Ok(Self { letters })
    }

    pub fn empty() -> Self {
        Self { letters: Vec::new() }
    }

    pub fn letters(&self) -> &[usize] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn first(&self) -> Option<usize> {
        self.letters.first().copied()
    }

    pub fn last(&self) -> Option<usize> {
        self.letters.last().copied()
    }

    pub fn inverse(&self, m: usize) -> Self {
        let k = 2 * m;
        Self {
            letters: self.letters.iter().rev().map(|&l| (l + m) % k).collect(),
        }
    }

    pub fn is_cyclically_reduced(&self, m: usize) -> bool {
        match (self.letters.first(), self.letters.last()) {
            (Some(&a), Some(&b)) => a != (b + m) % (2 * m),
            _ => true,
        }
    }

    pub fn rotate(&self, r: usize) -> Self {
        let mut letters = self.letters.clone();
        if !letters.is_empty() {
            let n = letters.len();
            letters.rotate_left(r % n);
        }
        Self { letters }
    }

    /// Lexicographically smallest rotation.
    pub fn canonical_rotation(&self) -> Self {
        if self.letters.is_empty() {
            return self.clone();
        }
        Self {
            letters: canonical_rotation(&self.letters),
        }
    }

    /// Signed letter counts: `+1` for generator `j < m`, `-1` for `j + m`.
    pub fn abelianization(&self, m: usize) -> Vec<i64> {
        let mut v = vec![0i64; m];
        for &l in &self.letters {
            if l < m {
                v[l] += 1;
            } else {
                v[l - m] -= 1;
            }
        }
        v
    }
}

/// Attracting fixed point of a cyclically reduced word.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitPoint {
    pub x: f64,
    pub witness: ReducedWord,
    pub disk: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveClass {
    pub representative: ReducedWord,
    /// Geodesic length `2 arccosh(|tr γ| / 2)`.
    pub length: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn funnel() -> SchottkyData {
        SchottkyData::build(&SurfaceConfig::symmetric_funnel(2, 1.0)).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn presets_validate() {
        for cfg in [
            SurfaceConfig::cylinder(2.0),
            SurfaceConfig::cylinder(0.3),
            SurfaceConfig::symmetric_funnel(2, 1.0),
            SurfaceConfig::symmetric_funnel(3, 0.5),
            SurfaceConfig::sl2z_funnel(),
        ] {
            let s = SchottkyData::build(&cfg).unwrap();
            for j in 0..s.m() {
                let p = s.generator(j + s.m()).compose(s.generator(j));
                assert!((p.a - 1.0).abs() < 1e-13 && p.b.abs() < 1e-12 && p.c.abs() < 1e-13 && (p.d - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cylinder_generator_is_conjugate_to_dilation() {
        let s = SchottkyData::build(&SurfaceConfig::cylinder(2.0)).unwrap();
        let g = s.generator(0);
        // trace of diag(e, 1/e)
        assert!((g.trace() - (1.0f64.exp() + (-1.0f64).exp())).abs() < 1e-13);
        assert!((g.attracting_fixed_point().unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn non_unit_determinant_is_rejected() {
        let cfg = SurfaceConfig::Explicit {
            matrices: vec![[2.0, 0.0, 0.0, 1.0]],
            disks: vec![Disk { center: -3.0, radius: 1.0 }, Disk { center: 3.0, radius: 1.0 }],
        };
        assert!(matches!(SchottkyData::build(&cfg), Err(Error::NonUnitDeterminant(0, _))));
    }

    #[test]
    fn touching_disks_are_rejected() {
        let cfg = SurfaceConfig::Explicit {
            matrices: vec![[1.0, 0.0, 0.0, 1.0]],
            disks: vec![Disk { center: -1.0, radius: 1.0 }, Disk { center: 1.0, radius: 1.0 }],
        };
        assert_eq!(SchottkyData::build(&cfg), Err(Error::OverlappingDisks(0, 1)));
    }

    #[test]
    fn diagonal_generator_fails_the_mapping_check() {
        let e = 1.0f64.exp();
        let cfg = SurfaceConfig::Explicit {
            matrices: vec![[e, 0.0, 0.0, 1.0 / e]],
            disks: vec![Disk { center: -3.0, radius: 1.0 }, Disk { center: 3.0, radius: 1.0 }],
        };
        assert!(matches!(SchottkyData::build(&cfg), Err(Error::MappingMismatch { .. })));
    }

    #[test]
    fn explicit_inverse_list_is_checked() {
        let s = funnel();
        let mats: Vec<[f64; 4]> = s.generators().iter().map(|g| g.to_array()).collect();
        let ok = SurfaceConfig::Explicit {
            matrices: mats.clone(),
            disks: s.disks().to_vec(),
        };
        assert_eq!(SchottkyData::build(&ok).unwrap(), s);
        let mut bad = mats;
        bad.swap(2, 3);
        let cfg = SurfaceConfig::Explicit {
            matrices: bad,
            disks: s.disks().to_vec(),
        };
        assert!(SchottkyData::build(&cfg).is_err());
    }

    #[test]
    fn mobius_examples() {
        assert_eq!(mobius_apply(&Mobius::IDENTITY, c(0.3, 0.1)).unwrap(), c(0.3, 0.1));
        let e = 1.0f64.exp();
        let g = Mobius::new(e, 0.0, 0.0, 1.0 / e);
        assert!((mobius_apply(&g, c(1.0, 0.0)).unwrap() - c(e * e, 0.0)).norm() < 1e-13);
        let h = Mobius::new(1.0, 2.0, 1.0, 3.0);
        assert_eq!(mobius_apply(&h, c(-3.0, 0.0)), Err(Error::PoleHit));
        assert!((h.apply_real(0.5) - 2.5 / 3.5).abs() < 1e-15);
    }

    #[test]
    fn composite_matrix_agrees_with_letterwise_action() {
        let s = funnel();
        let z = c(s.disk(1).center + 0.3, 0.2);
        for w in s.enumerate_words(5, WordSet::NotEndingIn(1)).unwrap().iter().step_by(7) {
            let a = mobius_apply(&s.word_matrix(w), z).unwrap();
            let b = s.apply_word(w, z).unwrap();
            assert!((a - b).norm() < 1e-12 * (1.0 + a.norm()));
        }
    }

    #[test]
    fn word_derivative_examples() {
        let s = funnel();
        let z = c(s.disk(0).center, 0.0);
        let (v, l) = s.word_derivative(&ReducedWord::empty(), z).unwrap();
        assert_eq!((v, l), (c(1.0, 0.0), c(0.0, 0.0)));
        let w = ReducedWord::new(vec![1], 2).unwrap();
        let (v, l) = s.word_derivative(&w, c(s.disk(0).center + 0.3, 0.0)).unwrap();
        assert!(v.im == 0.0 && v.re > 0.0);
        assert!(l.im.abs() < 1e-15);
        assert!((l.exp() - v).norm() < 1e-13 * v.norm());
    }

    #[test]
    fn word_derivative_matches_central_differences() {
        let s = funnel();
        let w = ReducedWord::new(vec![0, 1, 1, 2, 3], 2).unwrap();
        let z0 = c(s.disk(0).center + 0.2, 0.1);
        let (v, _) = s.word_derivative(&w, z0).unwrap();
        // The image is O(1) while the derivative is tiny, so a small step cancels badly.
        let h = 1e-3;
        let g = s.word_matrix(&w);
        let fd = (mobius_apply(&g, z0 + h).unwrap() - mobius_apply(&g, z0 - h).unwrap()) / (2.0 * h);
        assert!((fd - v).norm() <= 1e-6 * v.norm(), "{fd} vs {v}");
    }

    #[test]
    fn inadmissible_start_is_rejected() {
        let s = funnel();
        let w = ReducedWord::new(vec![1, 0], 2).unwrap();
        assert!(s.word_derivative(&w, c(s.disk(0).center, 0.0)).is_err());
    }

    #[test]
    fn word_counts() {
        let s = funnel();
        assert_eq!(s.enumerate_words(3, WordSet::All).unwrap().len(), 36);
        assert_eq!(s.enumerate_words(2, WordSet::NotEndingIn(1)).unwrap().len(), 9);
        assert!(s.enumerate_words(1, WordSet::FirstLast(0, 1)).unwrap().is_empty());
        assert_eq!(s.enumerate_words(1, WordSet::FirstLast(2, 2)).unwrap().len(), 1);
        let all = s.enumerate_words(4, WordSet::All).unwrap();
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(all, sorted);
    }

    #[test]
    fn word_cap_is_enforced() {
        let s = funnel();
        assert!(matches!(
            s.enumerate_words_capped(10, WordSet::All, 1000),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn cylinder_has_two_limit_points() {
        let s = SchottkyData::build(&SurfaceConfig::cylinder(2.0)).unwrap();
        let pts = s.limit_points(4, 10).unwrap();
        assert_eq!(pts.len(), 2);
        assert!((pts[0].x + 1.0).abs() < 1e-12 && (pts[1].x - 1.0).abs() < 1e-12);
    }

    #[test]
    fn limit_points_are_fixed_and_inside_intervals() {
        let s = funnel();
        let pts = s.limit_points(6, 30).unwrap();
        assert_eq!(pts.len(), 4 * 30);
        for p in &pts {
            assert!((s.apply_word_real(&p.witness, p.x) - p.x).abs() <= 1e-12);
            let (lo, hi) = s.disk(p.disk).interval();
            assert!(lo < p.x && p.x < hi);
        }
    }

    #[test]
    fn primitive_class_counts() {
        let cyl = SchottkyData::build(&SurfaceConfig::cylinder(2.0)).unwrap();
        let merged = cyl.primitive_classes(6, ClassConvention::MergeInverses).unwrap();
        assert_eq!(merged.len(), 1);
        assert!((merged[0].length - 2.0).abs() < 1e-12);
        assert_eq!(cyl.primitive_classes(6, ClassConvention::Oriented).unwrap().len(), 2);

        let s = funnel();
        assert_eq!(s.primitive_classes(1, ClassConvention::Oriented).unwrap().len(), 4);
        assert_eq!(s.primitive_classes(1, ClassConvention::MergeInverses).unwrap().len(), 2);
    }

    #[test]
    fn primitive_classes_match_rotation_class_brute_force() {
        use std::collections::BTreeSet;
        let s = funnel();
        for n in 1..=6 {
            let mut classes = BTreeSet::new();
            for w in s.enumerate_words(n, WordSet::All).unwrap() {
                if !w.is_cyclically_reduced(2) {
                    continue;
                }
                let primitive = (1..n).all(|r| n % r != 0 || w.rotate(r) != w);
                if primitive {
                    classes.insert(w.canonical_rotation());
                }
            }
            let got: BTreeSet<_> = s
                .primitive_classes(n, ClassConvention::Oriented)
                .unwrap()
                .into_iter()
                .filter(|c| c.representative.len() == n)
                .map(|c| c.representative)
                .collect();
            assert_eq!(got, classes, "length {n}");
        }
    }

    #[test]
    fn rotation_preserves_length() {
        let s = funnel();
        let w = ReducedWord::new(vec![0, 1, 0, 3, 3], 2).unwrap();
        let l = |w: &ReducedWord| s.word_matrix(w).trace().abs();
        assert!((l(&w) - l(&w.rotate(2))).abs() < 1e-9 * l(&w));
    }

    #[test]
    fn distortion_is_bounded_and_contraction_geometric() {
        let s = funnel();
        let rep = s.distortion_diagnostics(6).unwrap();
        assert!(rep.theta < 1.0);
        for w in rep.sup_derivative.windows(2) {
            assert!(w[1] < w[0]);
        }
        assert!(rep.distortion.is_finite());
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfgs = [
            r#"{"preset":"cylinder","length":2.0}"#,
            r#"{"preset":"symmetric-funnel","m":3,"separation":0.5}"#,
            r#"{"preset":"sl2z-funnel"}"#,
            r#"{"matrices":[[2.0,3.0,1.0,2.0]],"disks":[{"center":-2.0,"radius":1.0},{"center":2.0,"radius":1.0}]}"#,
        ];
        for text in cfgs {
            let cfg: SurfaceConfig = serde_json::from_str(text).unwrap();
            SchottkyData::build(&cfg).unwrap();
            let again: SurfaceConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
            assert_eq!(cfg, again);
        }
    }
}
