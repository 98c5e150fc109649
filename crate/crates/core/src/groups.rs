//! Finite groups, homomorphisms from the Schottky free group, unitary
//! representations and Cayley-graph expansion.
//!
//! Two representation types coexist. [`UnitaryRep`] lives on a finite group
//! and stores one matrix per element. [`Twist`] lives on the free group and
//! stores one matrix per letter; it is what the transfer operator consumes.
//! [`UnitaryRep::pull_back`] turns the former into the latter along a
//! [`GroupHom`].

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::{self, CMatrix, ONE, ZERO};
use crate::schottky::{ReducedWord, SchottkyData};
use crate::{Error, Result};

/// Closure cap for matrix groups.
pub const DEFAULT_CLOSURE_CAP: usize = 200_000;
/// Largest group whose full multiplication table is materialized.
pub const TABLE_CAP: usize = 4096;
/// Largest group handled by the numerical irrep decomposition.
pub const NUMERICAL_IRREP_CAP: usize = 200;
/// Dense eigensolve threshold for the expansion constant.
pub const DENSE_EXPANSION_CAP: usize = 4096;

const REP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupStructure {
    /// Element `k` is `k mod n`.
    Cyclic(usize),
    /// Element `k + n e` is `r^k s^e`.
    Dihedral(usize),
    Generic,
}

/// A finite group stored as a dense multiplication table.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteGroup {
    order: usize,
    table: Vec<u32>,
    identity: usize,
    inverse: Vec<usize>,
    structure: GroupStructure,
}

impl FiniteGroup {
    pub fn cyclic(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("cyclic group of order 0".into()));
        }
        let table = (0..n).flat_map(|a| (0..n).map(move |b| ((a + b) % n) as u32)).collect();
        let inverse = (0..n).map(|a| (n - a) % n).collect();
        Ok(Self {
            order: n,
            table,
            identity: 0,
            inverse,
            structure: GroupStructure::Cyclic(n),
        })
    }

    /// Dihedral group of order `2n`.
    pub fn dihedral(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("dihedral group needs n >= 1".into()));
        }
        let order = 2 * n;
        let split = |g: usize| (g % n, g / n);
        let mut table = vec![0u32; order * order];
        for g in 0..order {
            let (a, e) = split(g);
            for h in 0..order {
                let (b, f) = split(h);
                // r^a s^e r^b s^f = r^(a ± b) s^(e + f)
                let k = if e == 0 { (a + b) % n } else { (a + n - b) % n };
                table[g * order + h] = (k + n * ((e + f) % 2)) as u32;
            }
        }
        let inverse = (0..order)
            .map(|g| {
                let (a, e) = split(g);
                if e == 0 {
                    (n - a) % n
                } else {
                    g
                }
            })
            .collect();
        Ok(Self {
            order,
            table,
            identity: 0,
            inverse,
            structure: GroupStructure::Dihedral(n),
        })
    }

    /// Group from an explicit multiplication table `rows[g][h] = g h`.
    pub fn from_table(rows: &[Vec<usize>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::NotClosed("empty table".into()));
        }
        if n > TABLE_CAP {
            return Err(Error::TooLarge(TABLE_CAP));
        }
        let mut table = vec![0u32; n * n];
        for (g, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::NotClosed(format!("row {g} has length {}", row.len())));
            }
            for (h, &p) in row.iter().enumerate() {
                if p >= n {
                    return Err(Error::NotClosed(format!("entry {p} out of range")));
                }
                table[g * n + h] = p as u32;
            }
        }
        let identity = (0..n)
            .find(|&e| (0..n).all(|g| table[e * n + g] as usize == g && table[g * n + e] as usize == g))
            .ok_or_else(|| Error::NotClosed("no identity element".into()))?;
        let mut inverse = vec![usize::MAX; n];
        for g in 0..n {
            let h = (0..n)
                .find(|&h| table[g * n + h] as usize == identity && table[h * n + g] as usize == identity)
                .ok_or_else(|| Error::NotClosed(format!("element {g} has no inverse")))?;
            inverse[g] = h;
        }
        let group = Self {
            order: n,
            table,
            identity,
            inverse,
            structure: GroupStructure::Generic,
        };
        group.check_associativity()?;
        Ok(group)
    }

    /// Associativity on all triples for `|G| <= 64`, on a deterministic sample otherwise.
    fn check_associativity(&self) -> Result<()> {
        let n = self.order;
        let check = |a: usize, b: usize, c: usize| {
            if self.mul(self.mul(a, b), c) != self.mul(a, self.mul(b, c)) {
                Err(Error::NotClosed(format!("({a} {b}) {c} != {a} ({b} {c})")))
            } else {
                Ok(())
            }
        };
        if n <= 64 {
            for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        check(a, b, c)?;
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            for _ in 0..20_000 {
                check(rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n))?;
            }
        }
        Ok(())
    }

    /// Closure of integer matrices in `SL_2(Z/qZ)` by breadth-first
    /// multiplication. Returns the group and the indices of the generators.
    pub fn matrix_group_mod_q(generators: &[[i64; 4]], q: u64, cap: usize) -> Result<(Self, Vec<usize>)> {
        if q < 2 {
            return Err(Error::InvalidInput(format!("modulus must be at least 2, got {q}")));
        }
        let qi = q as i64;
        let reduce = |m: [i64; 4]| m.map(|v| v.rem_euclid(qi) as u64);
        let mul = |x: [u64; 4], y: [u64; 4]| {
            [
                (x[0] * y[0] + x[1] * y[2]) % q,
                (x[0] * y[1] + x[1] * y[3]) % q,
                (x[2] * y[0] + x[3] * y[2]) % q,
                (x[2] * y[1] + x[3] * y[3]) % q,
            ]
        };
        let gens: Vec<[u64; 4]> = generators.iter().map(|g| reduce(*g)).collect();
        for (i, g) in gens.iter().enumerate() {
            let det = (g[0] * g[3] + q * q - (g[1] * g[2]) % q) % q;
            if det != 1 % q {
                return Err(Error::NonUnitDeterminant(i, det as f64));
            }
        }
        let id = [1 % q, 0, 0, 1 % q];
        let mut elements = vec![id];
        let mut index: HashMap<[u64; 4], usize> = HashMap::from([(id, 0)]);
        let mut head = 0;
        while head < elements.len() {
            let x = elements[head];
            head += 1;
            for g in &gens {
                let y = mul(x, *g);
                if !index.contains_key(&y) {
                    if elements.len() >= cap {
                        return Err(Error::TooLarge(cap));
                    }
                    index.insert(y, elements.len());
                    elements.push(y);
                }
            }
        }
        let n = elements.len();
        if n > TABLE_CAP {
            return Err(Error::TooLarge(TABLE_CAP));
        }
        let mut table = vec![0u32; n * n];
        for (a, x) in elements.iter().enumerate() {
            for (b, y) in elements.iter().enumerate() {
                table[a * n + b] = index[&mul(*x, *y)] as u32;
            }
        }
        let inverse = (0..n)
            .map(|a| (0..n).find(|&b| table[a * n + b] == 0).expect("finite closure contains inverses"))
            .collect();
        let gen_idx = gens.iter().map(|g| index[g]).collect();
        Ok((
            Self {
                order: n,
                table,
                identity: 0,
                inverse,
                structure: GroupStructure::Generic,
            },
            gen_idx,
        ))
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn structure(&self) -> GroupStructure {
        self.structure
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table[a * self.order + b] as usize
    }

    #[inline]
    pub fn inv(&self, a: usize) -> usize {
        self.inverse[a]
    }

    pub fn is_abelian(&self) -> bool {
        (0..self.order).all(|a| (0..a).all(|b| self.mul(a, b) == self.mul(b, a)))
    }

    /// The same group with element `g` renamed `perm[g]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let n = self.order;
        let mut rows = vec![vec![0usize; n]; n];
        for a in 0..n {
            for b in 0..n {
                rows[perm[a]][perm[b]] = perm[self.mul(a, b)];
            }
        }
        Self::from_table(&rows)
    }

    /// Subgroup generated by `gens`, as a sorted element list.
    pub fn closure(&self, gens: &[usize]) -> Vec<usize> {
        let mut seen = vec![false; self.order];
        seen[self.identity] = true;
        let mut queue = vec![self.identity];
        let mut head = 0;
        while head < queue.len() {
            let x = queue[head];
            head += 1;
            for &g in gens {
                let y = self.mul(x, g);
                if !seen[y] {
                    seen[y] = true;
                    queue.push(y);
                }
            }
        }
        queue.sort_unstable();
        queue
    }
}

/// Group specification as it appears in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum GroupSpec {
    /// `Z/nZ`; by default every generator maps to `1`.
    Cyclic {
        n: usize,
        #[serde(default)]
        images: Option<Vec<usize>>,
    },
    /// Dihedral group of order `2n`; by default generators alternate between
    /// the rotation `r` (index 1) and the reflection `s` (index `n`).
    Dihedral {
        n: usize,
        #[serde(default)]
        images: Option<Vec<usize>>,
    },
    /// Reduction of integer generators modulo `q`.
    Congruence { q: u64 },
    /// Explicit multiplication table together with generator images.
    Table { elements: Vec<Vec<usize>>, images: Vec<usize> },
}

impl GroupSpec {
    /// Builds the group together with the homomorphism from the Schottky group.
    pub fn build(&self, schottky: &SchottkyData) -> Result<GroupHom> {
        let m = schottky.m();
        match self {
            GroupSpec::Cyclic { n, images } => {
                let g = FiniteGroup::cyclic(*n)?;
                let imgs = images.clone().unwrap_or_else(|| vec![1 % n; m]);
                GroupHom::new(g, imgs, m)
            }
            GroupSpec::Dihedral { n, images } => {
                let g = FiniteGroup::dihedral(*n)?;
                let imgs = images
                    .clone()
                    .unwrap_or_else(|| (0..m).map(|j| if j % 2 == 0 { 1 % n } else { *n }).collect());
                GroupHom::new(g, imgs, m)
            }
            GroupSpec::Congruence { q } => {
                let ints = schottky.integer_generators().ok_or_else(|| {
                    Error::InvalidInput("congruence covers need integer generator matrices".into())
                })?;
                let (g, idx) = FiniteGroup::matrix_group_mod_q(&ints[..m], *q, DEFAULT_CLOSURE_CAP)?;
                GroupHom::new(g, idx, m)
            }
            GroupSpec::Table { elements, images } => {
                let g = FiniteGroup::from_table(elements)?;
                GroupHom::new(g, images.clone(), m)
            }
        }
    }
}

/// Homomorphism from the free group on `m` letters to a finite group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupHom {
    group: FiniteGroup,
    images: Vec<usize>,
}

impl GroupHom {
    /// `images` lists either the `m` generator images or all `2m` letter images.
    pub fn new(group: FiniteGroup, images: Vec<usize>, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidInput("homomorphism needs m >= 1".into()));
        }
        if let Some(&bad) = images.iter().find(|&&g| g >= group.order()) {
            return Err(Error::InvalidInput(format!("image {bad} outside group of order {}", group.order())));
        }
        let images = if images.len() == m {
            let mut all = images.clone();
            all.extend(images.iter().map(|&g| group.inv(g)));
            all
        } else if images.len() == 2 * m {
            for j in 0..m {
                if images[j + m] != group.inv(images[j]) {
                    return Err(Error::InvalidInput(format!("image of letter {} is not inverse to letter {j}", j + m)));
                }
            }
            images
        } else {
            return Err(Error::InvalidInput(format!("expected {m} or {} images, got {}", 2 * m, images.len())));
        };
        Ok(Self { group, images })
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.group
    }

    pub fn m(&self) -> usize {
        self.images.len() / 2
    }

    /// Image of letter `j` in `0..2m`.
    pub fn image(&self, j: usize) -> usize {
        self.images[j]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    pub fn word_image(&self, w: &ReducedWord) -> usize {
        w.letters()
            .iter()
            .fold(self.group.identity(), |acc, &l| self.group.mul(acc, self.images[l]))
    }

    /// The subgroup generated by the images.
    pub fn image_subgroup(&self) -> Vec<usize> {
        self.group.closure(&self.images)
    }

    pub fn is_surjective(&self) -> bool {
        self.image_subgroup().len() == self.group.order()
    }

    /// Same homomorphism after renaming group elements by `perm`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let g = self.group.relabel(perm)?;
        Ok(Self {
            group: g,
            images: self.images.iter().map(|&x| perm[x]).collect(),
        })
    }
}

/// Averaging operator `T f(x) = (1/2m) Σ_j f(x g_j)` as a dense matrix.
pub fn averaging_operator(h: &GroupHom) -> DMatrix<f64> {
    let g = h.group();
    let n = g.order();
    let k = h.images().len() as f64;
    let mut t = DMatrix::zeros(n, n);
    for x in 0..n {
        for &gj in h.images() {
            t[(x, g.mul(x, gj))] += 1.0 / k;
        }
    }
    t
}

/// Eigenvalues of the averaging operator with the one nearest to 1 (the
/// constants) removed, increasing.
pub fn nontrivial_spectrum(h: &GroupHom) -> Vec<f64> {
    let mut ev = linalg::symmetric_eigenvalues(&averaging_operator(h));
    if let Some(pos) = ev
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - 1.0).abs().partial_cmp(&(b.1 - 1.0).abs()).unwrap())
        .map(|p| p.0)
    {
        ev.remove(pos);
    }
    ev
}

/// Two-sided expansion constant `ε = 1 - max |λ|` over nontrivial eigenvalues.
pub fn expansion_epsilon(h: &GroupHom) -> f64 {
    let n = h.group().order();
    if n < 2 {
        return 1.0;
    }
    let top = if n <= DENSE_EXPANSION_CAP {
        nontrivial_spectrum(h).iter().map(|v| v.abs()).fold(0.0, f64::max)
    } else {
        expansion_power_iteration(h, 20_000, 1e-12)
    };
    (1.0 - top).max(0.0)
}

/// `max |λ|` over mean-zero functions by power iteration on `T²`.
///
/// Works from the multiplication table without forming `T`.
pub fn expansion_power_iteration(h: &GroupHom, max_iter: usize, tol: f64) -> f64 {
    let g = h.group();
    let n = g.order();
    let k = h.images().len() as f64;
    let apply = |f: &DVector<f64>| {
        DVector::from_fn(n, |x, _| h.images().iter().map(|&gj| f[g.mul(x, gj)]).sum::<f64>() / k)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xe9a);
    let mut f = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
    let center = |v: &mut DVector<f64>| {
        let mean = v.mean();
        v.add_scalar_mut(-mean);
    };
    center(&mut f);
    let mut rate = 0.0;
    for _ in 0..max_iter {
        let norm = f.norm();
        if norm == 0.0 {
            return 0.0;
        }
        f /= norm;
        let mut next = apply(&apply(&f));
        center(&mut next);
        let r = next.norm();
        let done = (r - rate).abs() <= tol * r.max(1e-300);
        rate = r;
        f = next;
        if done {
            break;
        }
    }
    rate.sqrt()
}

/// Unitary representation of a finite group: one matrix per element.
#[derive(Debug, Clone)]
pub struct UnitaryRep {
    dim: usize,
    matrices: Vec<CMatrix>,
    label: String,
}

impl UnitaryRep {
    pub fn from_matrices(group: &FiniteGroup, matrices: Vec<CMatrix>, label: impl Into<String>) -> Result<Self> {
        if matrices.len() != group.order() {
            return Err(Error::InvalidInput("one matrix per group element required".into()));
        }
        let dim = matrices[0].nrows();
        let rep = Self {
            dim,
            matrices,
            label: label.into(),
        };
        let (hom, unit) = rep.residuals(group);
        if hom > REP_TOL || unit > REP_TOL {
            return Err(Error::InvalidInput(format!(
                "not a unitary representation (homomorphism residual {hom:.3e}, unitarity residual {unit:.3e})"
            )));
        }
        Ok(rep)
    }

    pub fn trivial(group: &FiniteGroup) -> Self {
        Self {
            dim: 1,
            matrices: vec![linalg::identity(1); group.order()],
            label: "trivial".into(),
        }
    }

    /// Left regular representation `L(g) e_y = e_{gy}`.
    pub fn regular(group: &FiniteGroup) -> Self {
        let n = group.order();
        let matrices = (0..n)
            .map(|g| {
                let mut m = CMatrix::zeros(n, n);
                for y in 0..n {
                    m[(group.mul(g, y), y)] = ONE;
                }
                m
            })
            .collect();
        Self {
            dim: n,
            matrices,
            label: "regular".into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn matrix(&self, g: usize) -> &CMatrix {
        &self.matrices[g]
    }

    pub fn character(&self, g: usize) -> Complex64 {
        self.matrices[g].trace()
    }

    pub fn characters(&self) -> Vec<Complex64> {
        (0..self.matrices.len()).map(|g| self.character(g)).collect()
    }

    /// `<χ, χ'> = (1/|G|) Σ_g χ(g) conj(χ'(g))`.
    pub fn character_inner(&self, other: &UnitaryRep) -> Complex64 {
        let n = self.matrices.len() as f64;
        (0..self.matrices.len())
            .map(|g| self.character(g) * other.character(g).conj())
            .sum::<Complex64>()
            / n
    }

    pub fn is_irreducible(&self) -> bool {
        (self.character_inner(self).re - 1.0).abs() < 1e-8
    }

    /// Maximal homomorphism and unitarity residuals (all pairs for
    /// `|G| <= 24`, generator-free sample of pairs otherwise).
    pub fn residuals(&self, group: &FiniteGroup) -> (f64, f64) {
        let n = group.order();
        let mut hom: f64 = 0.0;
        let step = if n <= 24 { 1 } else { (n / 24).max(1) };
        for a in (0..n).step_by(1) {
            for b in (0..n).step_by(step) {
                let lhs = &self.matrices[group.mul(a, b)];
                let rhs = &self.matrices[a] * &self.matrices[b];
                hom = hom.max(linalg::max_abs_diff(lhs, &rhs));
            }
        }
        let unit = self.matrices.iter().map(linalg::unitarity_defect).fold(0.0, f64::max);
        (hom, unit)
    }

    /// `ν = ρ ⊗ conj(ρ)`.
    pub fn tensor_conjugate(&self) -> Self {
        let matrices = self.matrices.iter().map(|m| linalg::kron(m, &m.map(|z| z.conj()))).collect();
        Self {
            dim: self.dim * self.dim,
            matrices,
            label: format!("{} (x) conj", self.label),
        }
    }

    /// `(1/|G|) Σ_g ν(g)`: orthogonal projector onto the invariant vectors.
    pub fn trivial_projector(&self) -> CMatrix {
        let n = self.matrices.len() as f64;
        let mut p = CMatrix::zeros(self.dim, self.dim);
        for m in &self.matrices {
            p += m;
        }
        p / Complex64::from(n)
    }

    pub fn direct_sum(&self, other: &UnitaryRep) -> Self {
        let matrices = self
            .matrices
            .iter()
            .zip(&other.matrices)
            .map(|(a, b)| linalg::block_diag(&[a, b]))
            .collect();
        Self {
            dim: self.dim + other.dim,
            matrices,
            label: format!("{} + {}", self.label, other.label),
        }
    }

    /// The representation `ρ ∘ π` of the free group, recorded per letter.
    pub fn pull_back(&self, h: &GroupHom) -> Twist {
        Twist {
            dim: self.dim,
            letters: h.images().iter().map(|&g| self.matrices[g].clone()).collect(),
            label: self.label.clone(),
        }
    }
}

/// Irreducible unitary representations up to equivalence, trivial first.
pub fn irreps(group: &FiniteGroup) -> Result<Vec<UnitaryRep>> {
    match group.structure() {
        GroupStructure::Cyclic(n) => Ok(cyclic_irreps(n)),
        GroupStructure::Dihedral(n) => Ok(dihedral_irreps(n)),
        GroupStructure::Generic => numerical_irreps(group, 5),
    }
}

/// `e^{2πi j/n}`, exact at multiples of a quarter turn.
fn root_of_unity(j: usize, n: usize) -> Complex64 {
    if (4 * j) % n == 0 {
        return [ONE, Complex64::new(0.0, 1.0), -ONE, Complex64::new(0.0, -1.0)][(4 * j / n) % 4];
    }
    Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64)
}

fn cyclic_irreps(n: usize) -> Vec<UnitaryRep> {
    (0..n)
        .map(|k| UnitaryRep {
            dim: 1,
            matrices: (0..n)
                .map(|g| CMatrix::from_element(1, 1, root_of_unity((k * g) % n, n)))
                .collect(),
            label: if k == 0 { "trivial".into() } else { format!("chi_{k}") },
        })
        .collect()
}

fn dihedral_irreps(n: usize) -> Vec<UnitaryRep> {
    let order = 2 * n;
    let one_dim = |r: f64, s: f64, label: &str| UnitaryRep {
        dim: 1,
        matrices: (0..order)
            .map(|g| {
                let (a, e) = (g % n, g / n);
                CMatrix::from_element(1, 1, Complex64::from(r.powi(a as i32) * s.powi(e as i32)))
            })
            .collect(),
        label: label.into(),
    };
    let mut out = vec![one_dim(1.0, 1.0, "trivial"), one_dim(1.0, -1.0, "sign")];
    if n % 2 == 0 {
        out.push(one_dim(-1.0, 1.0, "alt_r"));
        out.push(one_dim(-1.0, -1.0, "alt_rs"));
    }
    let swap = CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let mut k = 1;
    while 2 * k < n {
        let matrices = (0..order)
            .map(|g| {
                let (a, e) = (g % n, g / n);
                let w = Complex64::from_polar(1.0, 2.0 * PI * ((k * a) % n) as f64 / n as f64);
                let rot = CMatrix::from_row_slice(2, 2, &[w, ZERO, ZERO, w.conj()]);
                if e == 0 {
                    rot
                } else {
                    rot * &swap
                }
            })
            .collect();
        out.push(UnitaryRep {
            dim: 2,
            matrices,
            label: format!("rho_{k}"),
        });
        k += 1;
    }
    out
}

/// Decomposition of the regular representation through a random Hermitian
/// element of its commutant.
pub fn numerical_irreps(group: &FiniteGroup, attempts: usize) -> Result<Vec<UnitaryRep>> {
    let n = group.order();
    if n > NUMERICAL_IRREP_CAP {
        return Err(Error::TooLarge(NUMERICAL_IRREP_CAP));
    }
    let mut last = Error::DecompositionFailure("no attempt made".into());
    for attempt in 0..attempts.max(1) {
        match decompose_once(group, 0x1e_ee_ee + attempt as u64) {
            Ok(list) => return Ok(list),
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn decompose_once(group: &FiniteGroup, seed: u64) -> Result<Vec<UnitaryRep>> {
    let n = group.order();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // A = Σ_h c_h R(h) with R(h) e_y = e_{y h^-1}, which commutes with left translations.
    let mut a = CMatrix::zeros(n, n);
    for h in 0..n {
        let c = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
        let hinv = group.inv(h);
        for y in 0..n {
            a[(group.mul(y, hinv), y)] += c;
        }
    }
    let herm = &a + a.adjoint();
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let scale = eig.eigenvalues.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let tol = 1e-7 * scale;
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for &i in &order {
        match clusters.last_mut() {
            Some(c) if (eig.eigenvalues[i] - eig.eigenvalues[*c.last().unwrap()]).abs() <= tol => c.push(i),
            _ => clusters.push(vec![i]),
        }
    }
    let regular = UnitaryRep::regular(group);
    let mut found: Vec<(UnitaryRep, usize)> = Vec::new();
    for cluster in clusters {
        let d = cluster.len();
        let q = CMatrix::from_fn(n, d, |r, c| eig.eigenvectors[(r, cluster[c])]);
        let qa = q.adjoint();
        let mut mats = Vec::with_capacity(n);
        for g in 0..n {
            let lq = regular.matrix(g) * &q;
            let block = &qa * &lq;
            if linalg::max_abs_diff(&lq, &(&q * &block)) > 1e-8 {
                return Err(Error::DecompositionFailure("eigenspace is not invariant".into()));
            }
            mats.push(block);
        }
        let rep = UnitaryRep {
            dim: d,
            matrices: mats,
            label: String::new(),
        };
        let norm = rep.character_inner(&rep).re;
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::DecompositionFailure(format!("block of dimension {d} has <chi, chi> = {norm:.6}")));
        }
        match found.iter_mut().find(|(r, _)| (r.character_inner(&rep).re - 1.0).abs() < 1e-6) {
            Some(entry) => entry.1 += 1,
            None => found.push((rep, 1)),
        }
    }
    for (rep, copies) in &found {
        if *copies != rep.dim {
            return Err(Error::DecompositionFailure(format!(
                "irrep of dimension {} appears {copies} times",
                rep.dim
            )));
        }
    }
    let total: usize = found.iter().map(|(r, _)| r.dim * r.dim).sum();
    if total != n {
        return Err(Error::DecompositionFailure(format!("sum of squared dimensions {total} != {n}")));
    }
    let mut reps: Vec<UnitaryRep> = found.into_iter().map(|(r, _)| r).collect();
    let trivial = UnitaryRep::trivial(group);
    reps.sort_by(|a, b| {
        let ta = (a.character_inner(&trivial).re - 1.0).abs() < 1e-6;
        let tb = (b.character_inner(&trivial).re - 1.0).abs() < 1e-6;
        tb.cmp(&ta).then(a.dim.cmp(&b.dim)).then_with(|| {
            let ka: Vec<f64> = a.characters().iter().map(|c| c.re).collect();
            let kb: Vec<f64> = b.characters().iter().map(|c| c.re).collect();
            kb.partial_cmp(&ka).unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    for (i, r) in reps.iter_mut().enumerate() {
        r.label = if i == 0 { "trivial".into() } else { format!("irrep_{i}_dim{}", r.dim) };
    }
    // Reorthonormalize: eigenvector blocks are unitary only up to solver precision.
    for r in &mut reps {
        for m in &mut r.matrices {
            let svd = m.clone().svd(true, true);
            *m = svd.u.unwrap() * svd.v_t.unwrap();
        }
    }
    Ok(reps)
}

/// Representation of the free group on `m` letters: one unitary matrix per
/// letter, with the matrix of letter `j + m` the inverse of that of `j`.
#[derive(Debug, Clone)]
pub struct Twist {
    dim: usize,
    letters: Vec<CMatrix>,
    label: String,
}

impl Twist {
    pub fn trivial(m: usize) -> Self {
        Self {
            dim: 1,
            letters: vec![linalg::identity(1); 2 * m],
            label: "trivial".into(),
        }
    }

    /// `m` unitary matrices (inverses are appended) or all `2m`.
    pub fn from_generators(matrices: Vec<CMatrix>, label: impl Into<String>) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::InvalidInput("no generator matrices".into()));
        }
        let dim = matrices[0].nrows();
        for (j, g) in matrices.iter().enumerate() {
            if g.nrows() != dim || g.ncols() != dim || linalg::unitarity_defect(g) > REP_TOL {
                return Err(Error::InvalidInput(format!("matrix {j} is not a {dim}x{dim} unitary")));
            }
        }
        Ok(Self {
            dim,
            letters: matrices.iter().cloned().chain(matrices.iter().map(|g| g.adjoint())).collect(),
            label: label.into(),
        })
    }

    /// `χ_θ(γ) = exp(2πi <θ, P(γ)>)` with `P` the signed letter count.
    pub fn abelianization_character(theta: &[f64]) -> Self {
        let gens: Vec<Complex64> = theta.iter().map(|t| Complex64::from_polar(1.0, 2.0 * PI * t)).collect();
        let letters = gens
            .iter()
            .copied()
            .chain(gens.iter().map(|z| z.conj()))
            .map(|z| CMatrix::from_element(1, 1, z))
            .collect();
        Self {
            dim: 1,
            letters,
            label: format!("character{theta:?}"),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.letters.len() / 2
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn letter(&self, j: usize) -> &CMatrix {
        &self.letters[j]
    }

    /// `ρ(γ_{a_1}) ... ρ(γ_{a_N})`.
    pub fn word_matrix(&self, w: &ReducedWord) -> CMatrix {
        w.letters()
            .iter()
            .fold(linalg::identity(self.dim), |acc, &l| acc * &self.letters[l])
    }

    pub fn direct_sum(&self, other: &Twist) -> Self {
        Self {
            dim: self.dim + other.dim,
            letters: self
                .letters
                .iter()
                .zip(&other.letters)
                .map(|(a, b)| linalg::block_diag(&[a, b]))
                .collect(),
            label: format!("{} + {}", self.label, other.label),
        }
    }

    /// Whether every letter matrix is real.
    pub fn is_real(&self) -> bool {
        self.letters.iter().all(|m| m.iter().all(|z| z.im == 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schottky::SurfaceConfig;

    fn funnel() -> SchottkyData {
        SchottkyData::build(&SurfaceConfig::symmetric_funnel(2, 1.0)).unwrap()
    }

    fn sl2_f(q: u64) -> GroupHom {
        let s = SchottkyData::build(&SurfaceConfig::sl2z_funnel()).unwrap();
        GroupSpec::Congruence { q }.build(&s).unwrap()
    }

    fn check_irreps(g: &FiniteGroup) -> Vec<UnitaryRep> {
        let list = irreps(g).unwrap();
        let total: usize = list.iter().map(|r| r.dim() * r.dim()).sum();
        assert_eq!(total, g.order());
        for (i, a) in list.iter().enumerate() {
            let (hom, unit) = a.residuals(g);
            assert!(hom <= 1e-10 && unit <= 1e-10, "{} residuals {hom} {unit}", a.label());
            for (j, b) in list.iter().enumerate() {
                let ip = a.character_inner(b);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expect).norm() < 1e-8);
            }
        }
        list
    }

    #[test]
    fn small_groups() {
        assert_eq!(FiniteGroup::cyclic(1).unwrap().order(), 1);
        assert_eq!(FiniteGroup::dihedral(4).unwrap().order(), 8);
        let d3 = FiniteGroup::dihedral(3).unwrap();
        assert!(!d3.is_abelian());
        let rows: Vec<Vec<usize>> = (0..6).map(|a| (0..6).map(|b| d3.mul(a, b)).collect()).collect();
        assert!(FiniteGroup::from_table(&rows).is_ok());
    }

    #[test]
    fn broken_tables_are_rejected() {
        let rows = vec![vec![0, 1], vec![1, 1]];
        assert!(matches!(FiniteGroup::from_table(&rows), Err(Error::NotClosed(_))));
        // Latin square without associativity.
        let rows = vec![vec![0, 1, 2], vec![1, 0, 2], vec![2, 2, 0]];
        assert!(FiniteGroup::from_table(&rows).is_err());
    }

    #[test]
    fn congruence_closures() {
        assert_eq!(sl2_f(2).group().order(), 6);
        assert_eq!(sl2_f(3).group().order(), 24);
        assert_eq!(sl2_f(5).group().order(), 120);
        let (_, _) = FiniteGroup::matrix_group_mod_q(&[[2, 3, 1, 2]], 7, 1000).unwrap();
        assert!(matches!(
            FiniteGroup::matrix_group_mod_q(&[[3, 8, 1, 3], [2, 1, 3, 2]], 7, 10),
            Err(Error::TooLarge(10))
        ));
    }

    #[test]
    fn cyclic_and_dihedral_irreps() {
        let z2 = check_irreps(&FiniteGroup::cyclic(2).unwrap());
        assert!((z2[1].character(1) + 1.0).norm() < 1e-15);
        for n in 3..=6 {
            check_irreps(&FiniteGroup::dihedral(n).unwrap());
        }
    }

    #[test]
    fn numerical_path_reproduces_s3() {
        let d3 = FiniteGroup::dihedral(3).unwrap();
        let rows: Vec<Vec<usize>> = (0..6).map(|a| (0..6).map(|b| d3.mul(a, b)).collect()).collect();
        let g = FiniteGroup::from_table(&rows).unwrap();
        let list = check_irreps(&g);
        let dims: Vec<usize> = list.iter().map(|r| r.dim()).collect();
        assert_eq!(dims, vec![1, 1, 2]);
        // Classical character of the 2-dim irrep: 2, -1 on rotations, 0 on reflections.
        let chi = list[2].characters();
        assert!((chi[1] + 1.0).norm() < 1e-9 && chi[3].norm() < 1e-9);
    }

    #[test]
    fn sl2_f3_and_f5_irreps() {
        let dims3: Vec<usize> = check_irreps(sl2_f(3).group()).iter().map(|r| r.dim()).collect();
        assert_eq!(dims3, vec![1, 1, 1, 2, 2, 2, 3]);
        let dims5: Vec<usize> = check_irreps(sl2_f(5).group()).iter().map(|r| r.dim()).collect();
        assert_eq!(dims5, vec![1, 2, 2, 3, 3, 4, 4, 5, 6]);
    }

    #[test]
    fn regular_rep_character() {
        let g = FiniteGroup::dihedral(3).unwrap();
        let r = UnitaryRep::regular(&g);
        assert_eq!(r.character(0), Complex64::from(6.0));
        assert!((1..6).all(|x| r.character(x) == ZERO));
    }

    #[test]
    fn projector_is_orthogonal() {
        let g = FiniteGroup::dihedral(3).unwrap();
        for rep in irreps(&g).unwrap() {
            let p = rep.tensor_conjugate().trivial_projector();
            assert!(linalg::max_abs_diff(&(&p * &p), &p) < 1e-10);
            assert!(linalg::max_abs_diff(&p.adjoint(), &p) < 1e-10);
            // One invariant vector in End(V) for irreducible V.
            assert!((p.trace().re - 1.0).abs() < 1e-10);
        }
        let t = UnitaryRep::trivial(&g).tensor_conjugate().trivial_projector();
        assert_eq!(t, linalg::identity(1));
    }

    #[test]
    fn expansion_examples() {
        let z3 = GroupHom::new(FiniteGroup::cyclic(3).unwrap(), vec![1, 2], 2).unwrap();
        assert!((expansion_epsilon(&z3) - 0.5).abs() < 1e-12);
        for v in nontrivial_spectrum(&z3) {
            assert!((v + 0.5).abs() < 1e-12);
        }
        let idle = GroupHom::new(FiniteGroup::cyclic(5).unwrap(), vec![0, 0], 2).unwrap();
        assert_eq!(expansion_epsilon(&idle), 0.0);
        let proper = GroupHom::new(FiniteGroup::cyclic(4).unwrap(), vec![2, 2], 2).unwrap();
        assert!(!proper.is_surjective());
        assert!(expansion_epsilon(&proper) < 1e-12);
    }

    #[test]
    fn expansion_solvers_agree_on_sl2_f5() {
        let h = sl2_f(5);
        let dense = 1.0 - expansion_epsilon(&h);
        let power = expansion_power_iteration(&h, 100_000, 1e-15);
        assert!((dense - power).abs() < 1e-8, "{dense} vs {power}");
    }

    #[test]
    fn expansion_is_relabeling_invariant() {
        let h = sl2_f(3);
        let n = h.group().order();
        let perm: Vec<usize> = (0..n).map(|i| (7 * i + 3) % n).collect();
        let g = h.relabel(&perm).unwrap();
        assert!((expansion_epsilon(&h) - expansion_epsilon(&g)).abs() < 1e-10);
    }

    #[test]
    fn character_gap_inequality() {
        for (n, imgs) in [(3usize, vec![1, 2]), (5, vec![1, 2]), (7, vec![1, 3])] {
            let h = GroupHom::new(FiniteGroup::cyclic(n).unwrap(), imgs, 2).unwrap();
            let eps = expansion_epsilon(&h);
            for chi in irreps(h.group()).unwrap().iter().skip(1) {
                let avg: Complex64 = h.images().iter().map(|&g| chi.character(g)).sum::<Complex64>() / 4.0;
                assert!(avg.norm() <= 1.0 - eps + 1e-10);
            }
        }
    }

    #[test]
    fn abelianization_characters() {
        let s = funnel();
        let chi = Twist::abelianization_character(&[0.1, 0.35]);
        let w = ReducedWord::new(vec![0, 0, 1], 2).unwrap();
        let expect = Complex64::from_polar(1.0, 2.0 * PI * (2.0 * 0.1 + 0.35));
        assert!((chi.word_matrix(&w)[(0, 0)] - expect).norm() < 1e-14);
        let back = ReducedWord::new(vec![0, 1, 3, 2], 2);
        assert!(back.is_err());
        let g = ReducedWord::new(vec![0], 2).unwrap();
        let prod = chi.word_matrix(&g) * chi.word_matrix(&g.inverse(s.m()));
        assert!((prod[(0, 0)] - ONE).norm() < 1e-15);
        let zero = Twist::abelianization_character(&[0.0, 0.0]);
        assert!((zero.word_matrix(&w)[(0, 0)] - ONE).norm() < 1e-15);
    }

    #[test]
    fn pull_back_matches_images() {
        let h = GroupHom::new(FiniteGroup::dihedral(3).unwrap(), vec![1, 3], 2).unwrap();
        let rho = irreps(h.group()).unwrap().pop().unwrap();
        let t = rho.pull_back(&h);
        let w = ReducedWord::new(vec![0, 1, 1, 2], 2).unwrap();
        let direct = rho.matrix(h.word_image(&w));
        assert!(linalg::max_abs_diff(direct, &t.word_matrix(&w)) < 1e-12);
    }

    #[test]
    fn group_spec_parsing() {
        let s = funnel();
        for text in [
            r#"{"type":"cyclic","n":5}"#,
            r#"{"type":"dihedral","n":4}"#,
            r#"{"type":"cyclic","n":3,"images":[1,2]}"#,
        ] {
            let spec: GroupSpec = serde_json::from_str(text).unwrap();
            spec.build(&s).unwrap();
        }
        let sl = SchottkyData::build(&SurfaceConfig::sl2z_funnel()).unwrap();
        let spec: GroupSpec = serde_json::from_str(r#"{"type":"congruence","q":3}"#).unwrap();
        assert_eq!(spec.build(&sl).unwrap().group().order(), 24);
        assert!(spec.build(&s).is_err());
    }
}
