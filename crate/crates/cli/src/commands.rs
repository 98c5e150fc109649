use rayon::prelude::*;
use resonator_core::groups::{expansion_epsilon, irreps, nontrivial_spectrum, GroupHom};
use resonator_core::schottky::ClassConvention;
use resonator_core::zeta::{self, CoverScan, ResonanceReport, Zero};
use resonator_core::{thermo, wordops, Complex64, Discretization, ScanRectangle, Twist};
use serde::Serialize;

use crate::cache;
use crate::checkpoint::Checkpoint;
use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{float, to_json, write_file, Csv};

/// What a command produced: text for stdout and files for the output directory.
#[derive(Default)]
pub struct Outcome {
    pub stdout: String,
    pub files: Vec<(String, String)>,
}

impl Outcome {
    fn json<T: Serialize>(value: &T) -> Result<Self, CliError> {
        Ok(Self {
            stdout: to_json(value)?,
            files: Vec::new(),
        })
    }

    pub fn persist(&self, cfg: &RunConfig) -> Result<(), CliError> {
        if let Some(dir) = &cfg.out {
            for (name, text) in &self.files {
                write_file(dir, name, text)?;
            }
        }
        Ok(())
    }
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn need_group(cfg: &RunConfig, schottky: &resonator_core::SchottkyData) -> Result<GroupHom, CliError> {
    cfg.hom(schottky)?
        .ok_or_else(|| CliError::Config("this command needs a group ('group' in the config)".into()))
}

#[derive(Serialize)]
struct DimensionOut {
    delta: f64,
    nodes: usize,
    trace: Vec<(f64, f64)>,
}

pub fn dimension(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let s = cfg.schottky()?;
    let disc = Discretization::new(&s, cfg.nodes)?;
    let report = cache::dimension(&cfg.surface, &disc)?;
    let mut csv = Csv::new(&["sigma", "pressure"]);
    let sigmas: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
    let values: Vec<f64> = sigmas
        .par_iter()
        .map(|&x| thermo::pressure_with(&disc, x).map(|p| p.value))
        .collect::<Result<_, _>>()?;
    for (x, p) in sigmas.iter().zip(values) {
        csv.row(&[float(*x), float(p)]);
    }
    let mut out = Outcome::json(&DimensionOut {
        delta: report.delta,
        nodes: disc.nodes(),
        trace: report.trace,
    })?;
    out.files.push(("pressure.csv".into(), csv.text().into()));
    Ok(out)
}

#[derive(Serialize)]
struct ConvergenceRow {
    nodes: usize,
    det: [f64; 2],
    /// `|det - det_finest| / |det_finest|`.
    relative_change: f64,
}

#[derive(Serialize)]
struct ZetaEvalOut {
    s: [f64; 2],
    rep: String,
    nodes: usize,
    det: [f64; 2],
    log_derivative: [f64; 2],
    convergence: Vec<ConvergenceRow>,
}

pub fn zeta_eval(cfg: &RunConfig, s: Complex64) -> Result<Outcome, CliError> {
    let schottky = cfg.schottky()?;
    let twists = cfg.twists(&schottky)?;
    let levels: Vec<usize> = [cfg.nodes, cfg.nodes + 8, cfg.nodes + 16].to_vec();
    let discs: Vec<Discretization> = levels
        .iter()
        .map(|&m| Discretization::new(&schottky, m))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for t in &twists {
        let (det, ld) = discs[0].det_and_log_derivative(s, t)?;
        let dets: Vec<Complex64> = discs.iter().map(|d| d.fredholm_det(s, t)).collect();
        let finest = *dets.last().expect("three levels");
        rows.push(ZetaEvalOut {
            s: pair(s),
            rep: t.label().to_string(),
            nodes: cfg.nodes,
            det: pair(det),
            log_derivative: pair(ld),
            convergence: levels
                .iter()
                .zip(&dets)
                .map(|(&m, &d)| ConvergenceRow {
                    nodes: m,
                    det: pair(d),
                    relative_change: (d - finest).norm() / finest.norm(),
                })
                .collect(),
        });
    }
    Outcome::json(&rows)
}

#[derive(Serialize)]
struct ScanOut {
    config_hash: String,
    nodes: usize,
    rectangle: ScanRectangle,
    cells: usize,
    reports: Vec<ResonanceReport>,
}

/// Merges per-cell reports of one twist; zeros found twice on shared cell
/// edges are kept once.
fn merge_cells(rect: &ScanRectangle, label: &str, tol: f64, cells: Vec<ResonanceReport>) -> ResonanceReport {
    let slack = (1e3 * tol).max(1e-7);
    let mut zeros: Vec<Zero> = Vec::new();
    let mut winding_total = 0;
    for c in cells {
        winding_total += c.winding_total;
        for z in c.zeros {
            if !zeros.iter().any(|w| (w.s() - z.s()).norm() <= slack) {
                zeros.push(z);
            }
        }
    }
    zeros.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    ResonanceReport {
        rectangle: *rect,
        label: label.to_string(),
        zeros,
        winding_total,
        tol,
    }
}

/// Runs `work` on every unit not yet in the checkpoint, in parallel, recording
/// each as it completes. Results come back in unit order.
fn run_units<T, F>(ck: &Checkpoint, units: usize, work: F) -> Result<Vec<T>, CliError>
where
    T: Serialize + serde::de::DeserializeOwned + Send,
    F: Fn(usize) -> Result<T, CliError> + Sync,
{
    (0..units)
        .into_par_iter()
        .map(|u| {
            if let Some(done) = ck.completed(u)? {
                return Ok(done);
            }
            let r = work(u)?;
            ck.record(u, &r)?;
            Ok(r)
        })
        .collect()
}

pub fn scan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let schottky = cfg.schottky()?;
    let rect = cfg.rect()?;
    let twists = cfg.twists(&schottky)?;
    let disc = Discretization::new(&schottky, cfg.nodes)?;
    let hash = cfg.hash("scan");
    let ck = Checkpoint::open(cfg.checkpoint.as_deref(), &hash)?;
    let cells = rect.cells();
    let n = cells.len();
    let results: Vec<ResonanceReport> = run_units(&ck, twists.len() * n, |u| {
        let (t, c) = (u / n, u % n);
        Ok(zeta::locate_zeros(&disc, &cells[c], &twists[t], cfg.tol)?)
    })?;
    let mut results = results.into_iter();
    let mut reports = Vec::new();
    let mut files = Vec::new();
    for (i, t) in twists.iter().enumerate() {
        let chunk: Vec<ResonanceReport> = results.by_ref().take(n).collect();
        reports.push(merge_cells(&rect, t.label(), cfg.tol, chunk));
        let mut csv = Csv::new(&["re", "im", "abs_det", "arg_det"]);
        for (re, im, a, g) in zeta::det_grid(&disc, t, &rect) {
            csv.row(&[float(re), float(im), float(a), float(g)]);
        }
        files.push((format!("grid_{i}.csv"), csv.text().to_string()));
    }
    let mut out = Outcome::json(&ScanOut {
        config_hash: hash,
        nodes: cfg.nodes,
        rectangle: rect,
        cells: n,
        reports,
    })?;
    out.files.extend(files);
    out.files.push(("scan.json".into(), out.stdout.clone()));
    Ok(out)
}

#[derive(Serialize)]
struct CoverOut {
    config_hash: String,
    nodes: usize,
    #[serde(flatten)]
    scan: CoverScan,
}

pub fn cover_scan(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let schottky = cfg.schottky()?;
    let h = need_group(cfg, &schottky)?;
    let disc = Discretization::new(&schottky, cfg.nodes)?;
    let delta = cache::dimension(&cfg.surface, &disc)?.delta;
    let rect = match cfg.rect {
        Some(_) => cfg.rect()?,
        None => ScanRectangle::strip(delta, 0.15, zeta::DEFAULT_HEIGHT)?.with_nodes(cfg.nodes),
    };
    let hash = cfg.hash("cover-scan");
    let ck = Checkpoint::open(cfg.checkpoint.as_deref(), &hash)?;
    let reps = irreps(h.group())?;
    let reports = run_units(&ck, reps.len() - 1, |u| {
        Ok(zeta::irrep_report(&disc, &h, &reps[u + 1], &rect, cfg.tol)?)
    })?;
    let scan = CoverScan::assemble(&h, delta, &rect, reports);
    let mut csv = Csv::new(&["order", "epsilon", "eta"]);
    csv.row(&[scan.order.to_string(), float(scan.epsilon), float(scan.eta)]);
    let mut out = Outcome::json(&CoverOut {
        config_hash: hash,
        nodes: cfg.nodes,
        scan,
    })?;
    out.files.push(("cover_scan.json".into(), out.stdout.clone()));
    out.files.push(("eta.csv".into(), csv.text().into()));
    Ok(out)
}

pub fn expansion(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let schottky = cfg.schottky()?;
    let h = need_group(cfg, &schottky)?;
    let mut csv = Csv::new(&["quantity", "index", "value"]);
    csv.row(&["epsilon".into(), "0".into(), float(expansion_epsilon(&h))]);
    for (k, v) in nontrivial_spectrum(&h).iter().enumerate() {
        csv.row(&["eigenvalue".into(), (k + 1).to_string(), float(*v)]);
    }
    let text = csv.text().to_string();
    Ok(Outcome {
        stdout: text.clone(),
        files: vec![("expansion.csv".into(), text)],
    })
}

pub fn wordnorm(cfg: &RunConfig, n_max: usize) -> Result<Outcome, CliError> {
    let schottky = cfg.schottky()?;
    let h = need_group(cfg, &schottky)?;
    let reps = irreps(h.group())?;
    let chosen: Vec<usize> = match &cfg.rep {
        crate::config::RepSelector::Irrep(k) if *k >= 1 && *k < reps.len() => vec![*k],
        crate::config::RepSelector::AllNontrivial => (1..reps.len()).collect(),
        other => {
            return Err(CliError::Config(format!(
                "wordnorm needs 'all-nontrivial' or a nontrivial 'irrep:K', got '{other}'"
            )))
        }
    };
    let mut csv = Csv::new(&["rep", "n", "words", "wn_norm", "closed_form", "a_max_norm", "reference_quarter"]);
    for k in chosen {
        let r = wordops::verify_decay(&h, &reps[k], n_max)?;
        for row in &r.rows {
            csv.row(&[
                reps[k].label().to_string(),
                row.n.to_string(),
                float(row.words),
                float(row.wn_norm),
                float(row.closed_form),
                float(row.a_max_ratio * row.words),
                float(row.reference_quarter),
            ]);
        }
    }
    let text = csv.text().to_string();
    Ok(Outcome {
        stdout: text.clone(),
        files: vec![("wordnorm.csv".into(), text)],
    })
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    threshold: f64,
    pass: bool,
}

fn check(name: &'static str, value: f64, threshold: f64) -> Check {
    Check {
        name,
        value,
        threshold,
        pass: value <= threshold,
    }
}

#[derive(Serialize)]
struct VerifyOut {
    surface_delta: f64,
    checks: Vec<Check>,
    all_pass: bool,
}

/// Quick invariant suite on the configured surface and group (`Z/2` with
/// every generator mapped to the nontrivial element when none is given).
/// Returns the report and whether every check passed.
pub fn verify(cfg: &RunConfig) -> Result<(Outcome, bool), CliError> {
    let schottky = cfg.schottky()?;
    let m = schottky.m();
    let disc = Discretization::new(&schottky, cfg.nodes)?;
    let delta = cache::dimension(&cfg.surface, &disc)?.delta;
    let h = match cfg.hom(&schottky)? {
        Some(h) => h,
        None => resonator_core::GroupSpec::Cyclic { n: 2, images: None }.build(&schottky)?,
    };
    let trivial = Twist::trivial(m);
    let mut checks = Vec::new();

    let s3 = Complex64::new(3.0, 0.5);
    let euler = zeta::zeta_euler(&schottky, s3, &trivial, 10, 30, ClassConvention::Oriented, delta)?;
    let det = disc.fredholm_det(s3, &trivial);
    checks.push(check("fredholm_vs_euler", (det - euler.value).norm() / euler.value.norm(), 1e-6));

    let points = schottky.limit_points(4, 3)?;
    let rpf = thermo::rpf(&disc, 0.5 * delta.max(0.2))?;
    let mut worst: f64 = 0.0;
    for x in &points {
        for n in 1..=4 {
            let total: f64 = thermo::weights(&disc, &rpf, x, n)?.iter().map(|(_, w)| w).sum();
            worst = worst.max((total - 1.0).abs());
        }
    }
    checks.push(check("weight_normalization", worst, 1e-8));

    let samples = [Complex64::new(0.4, 0.0), Complex64::new(0.7, 2.0), Complex64::new(1.5, -1.0)];
    checks.push(check("venkov_zograf", zeta::venkov_zograf_check(&disc, &h, &samples)?, 1e-6));

    let reps = irreps(h.group())?;
    let (mut rec, mut bounds): (f64, f64) = (0.0, 0.0);
    for rho in &reps {
        let t = rho.pull_back(&h);
        let w = wordops::wn_recursion(&t, 6);
        for (n, wn) in w.iter().enumerate().skip(1) {
            let bf = wordops::word_operator(&t, resonator_core::schottky::WordSet::All, n)?;
            rec = rec.max(resonator_core::linalg::max_abs_diff(wn, &bf.matrix));
        }
    }
    for rho in reps.iter().skip(1) {
        let r = wordops::verify_decay(&h, rho, 1)?;
        bounds = bounds.max(r.max_abs_lambda - r.lambda_bound).max(r.max_abs_omega - r.omega_bound);
    }
    checks.push(check("recursion_vs_brute_force", rec, 1e-10));
    checks.push(check("spectral_bounds_excess", bounds, 1e-9));

    // The leading zero sits at δ for non-elementary groups; cylinders have δ = 0
    // and a double zero there, so only the half-plane check applies.
    let right = ScanRectangle::new(delta + 1e-3, delta + 1.0, -5.0, 5.0)?;
    let beyond = zeta::count_zeros(&disc, &right, &trivial)?;
    checks.push(check("zeros_right_of_delta", beyond.unsigned_abs() as f64, 0.0));
    if delta > 0.0 {
        let near = zeta::real_zero_near(&disc, delta, 1e-13)?;
        checks.push(check("determinant_zero_at_delta", (near - delta).abs(), 1e-6));
    }

    let all_pass = checks.iter().all(|c| c.pass);
    Ok((
        Outcome::json(&VerifyOut {
            surface_delta: delta,
            checks,
            all_pass,
        })?,
        all_pass,
    ))
}
