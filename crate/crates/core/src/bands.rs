//! Band-structure driver: run configuration, per-k-point solves with penalty
//! escalation, and band-gap extraction.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compensation::{default_shift, penalty_gamma, recompute_check, CompensatedOperator, EigResult, DEFAULT_RECOMPUTE_TOL};
use crate::dielectric::{assemble_m0, DielectricModel, Geometry, M0Diagonal};
use crate::error::{Error, Result};
use crate::fft::{build_symbols, gamma_safe, FftPreconditioner};
use crate::grid::{GridSpec, Space, VectorField};
use crate::lattice::{default_path_labels, make_lattice, sample_kpath, BlochVector, KPath, KSample, LatticeKind, LatticeSpec, DEFAULT_SAMPLES_PER_SEGMENT};
use crate::lobpcg::{lobpcg, SolverConfig};
use crate::multigrid::{auto_depth, build_hierarchy, MgPreconditioner};
use crate::stencil::ShiftedOperators;
use crate::{Complex64, LinearOperator};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrecondKind {
    Fft,
    Mg,
    None,
}

impl std::str::FromStr for PrecondKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fft" => Ok(PrecondKind::Fft),
            "mg" => Ok(PrecondKind::Mg),
            "none" => Ok(PrecondKind::None),
            other => Err(Error::Config(format!("unknown preconditioner '{other}' (fft, mg, none)"))),
        }
    }
}

/// Either labeled symmetry points or explicit Bloch vectors. With neither, the
/// lattice's default path is used.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KPathConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_segment: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 3]>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Directory receiving one field dump per k-point and band.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvectors: Option<PathBuf>,
}

fn default_l() -> f64 {
    1.0
}
fn default_eps() -> f64 {
    1.0
}
fn default_order() -> usize {
    2
}
fn default_nev() -> usize {
    10
}
fn default_tol() -> f64 {
    1e-5
}
fn default_maxit() -> usize {
    500
}
fn default_precond() -> PrecondKind {
    PrecondKind::Fft
}
fn default_mg_smooth() -> [usize; 2] {
    [2, 2]
}
fn default_mg_cycles() -> usize {
    1
}
fn default_recompute_tol() -> f64 {
    DEFAULT_RECOMPUTE_TOL
}
fn default_max_escalations() -> usize {
    6
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeKind,
    #[serde(default = "default_l")]
    pub l: f64,
    pub geometry: Geometry,
    /// Background permittivity.
    #[serde(default = "default_eps")]
    pub eps0: f64,
    /// Permittivity inside the structure.
    #[serde(default = "default_eps")]
    pub eps1: f64,
    #[serde(rename = "N", alias = "n")]
    pub n: usize,
    /// Order of accuracy of the scheme: 2, 4, 6 or 8.
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub kpath: KPathConfig,
    #[serde(default = "default_nev")]
    pub nev: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_maxit")]
    pub maxit: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_extra: Option<usize>,
    #[serde(default = "default_precond")]
    pub precond: PrecondKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mg_depth: Option<usize>,
    #[serde(default = "default_mg_smooth")]
    pub mg_smooth: [usize; 2],
    /// V-cycles per scalar sub-solve when multigrid preconditions the eigensolver.
    #[serde(default = "default_mg_cycles")]
    pub mg_cycles: usize,
    /// Start each k-point from the previous one's block. Forces sequential k-points.
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default = "default_recompute_tol")]
    pub recompute_tol: f64,
    #[serde(default = "default_max_escalations")]
    pub max_escalations: usize,
    /// Band index `n` (1-based) for the gap; automatic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap_band: Option<usize>,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    /// Defaults for everything but the lattice, structure and resolution.
    pub fn new(lattice: LatticeKind, geometry: Geometry, n: usize) -> RunConfig {
        RunConfig {
            lattice,
            l: default_l(),
            geometry,
            eps0: default_eps(),
            eps1: default_eps(),
            n,
            order: default_order(),
            kpath: KPathConfig::default(),
            nev: default_nev(),
            tol: default_tol(),
            maxit: default_maxit(),
            block_extra: None,
            precond: default_precond(),
            seed: 0,
            gamma: None,
            shift: None,
            mg_depth: None,
            mg_smooth: default_mg_smooth(),
            mg_cycles: default_mg_cycles(),
            warm_start: false,
            recompute_tol: default_recompute_tol(),
            max_escalations: default_max_escalations(),
            gap_band: None,
            output: OutputConfig::default(),
        }
    }

    pub fn from_json_str(s: &str) -> Result<RunConfig> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        RunConfig::from_json_str(&text)
    }

    pub fn order_k(&self) -> usize {
        self.order / 2
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.l > 0.0) || !self.l.is_finite() {
            return bad(format!("lattice constant must be positive, got {}", self.l));
        }
        if !(self.eps0 > 0.0 && self.eps1 > 0.0) {
            return bad(format!("permittivities must be positive, got {} and {}", self.eps0, self.eps1));
        }
        if ![2, 4, 6, 8].contains(&self.order) {
            return bad(format!("order must be 2, 4, 6 or 8, got {}", self.order));
        }
        if self.n < 2 {
            return bad(format!("N must be at least 2, got {}", self.n));
        }
        if self.nev == 0 {
            return bad("nev must be at least 1".into());
        }
        if !(self.tol > 0.0) || self.maxit == 0 {
            return bad(format!("invalid tolerance {} or maxit {}", self.tol, self.maxit));
        }
        if let Some(kind) = self.geometry.native_lattice() {
            if kind != self.lattice {
                return bad(format!("geometry {} is defined on the {kind} lattice, not {}", self.geometry, self.lattice));
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0) {
                return bad(format!("gamma override must be positive, got {g}"));
            }
        }
        if let Some(c) = self.shift {
            if !(c > 0.0) {
                return bad(format!("shift override must be positive, got {c}"));
            }
        }
        if self.precond == PrecondKind::Mg {
            if self.order != 2 {
                return bad("the multigrid preconditioner supports order 2 only".into());
            }
            let depth = self.mg_depth.unwrap_or_else(|| auto_depth(self.n));
            if depth == 0 || self.n % (1 << (depth - 1)) != 0 || (self.n >> (depth - 1)) > crate::multigrid::MAX_COARSE_N {
                return bad(format!("N = {} does not admit a multigrid hierarchy of depth {depth}", self.n));
            }
            if self.mg_cycles == 0 {
                return bad("mg_cycles must be at least 1".into());
            }
        }
        if let Some(n) = self.gap_band {
            if n == 0 || n >= self.nev {
                return bad(format!("gap band must satisfy 1 <= n < nev, got {n}"));
            }
        }
        let kp = &self.kpath;
        if kp.points.is_some() && (kp.labels.is_some() || kp.samples_per_segment.is_some()) {
            return bad("kpath takes either points or labels, not both".into());
        }
        if let Some(points) = &kp.points {
            if points.is_empty() || points.iter().flatten().any(|v| !v.is_finite()) {
                return bad("kpath points must be a non-empty list of finite vectors".into());
            }
        }
        self.kpoints().map(|_| ())
    }

    /// The sampled k-points in traversal order.
    pub fn kpoints(&self) -> Result<Vec<KSample>> {
        if let Some(points) = &self.kpath.points {
            let mut s = 0.0;
            let mut out = Vec::with_capacity(points.len());
            for (i, p) in points.iter().enumerate() {
                if i > 0 {
                    let q = points[i - 1];
                    s += ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt();
                }
                out.push(KSample { label: None, k: BlochVector(*p), abscissa: s });
            }
            return Ok(out);
        }
        let samples = self.kpath.samples_per_segment.unwrap_or(DEFAULT_SAMPLES_PER_SEGMENT);
        let labels: Vec<&str> = match &self.kpath.labels {
            Some(l) => l.iter().map(String::as_str).collect(),
            None => default_path_labels(self.lattice).to_vec(),
        };
        let path = KPath::from_labels(self.lattice, self.l, &labels, samples).map_err(|e| Error::Config(e.to_string()))?;
        sample_kpath(&path).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn settings(&self) -> SolveSettings {
        SolveSettings {
            nev: self.nev,
            tol: self.tol,
            maxit: self.maxit,
            block_extra: self.block_extra,
            precond: self.precond,
            gamma: self.gamma,
            shift: self.shift,
            mg_depth: self.mg_depth,
            mg_smooth: self.mg_smooth,
            mg_cycles: self.mg_cycles,
            recompute_tol: self.recompute_tol,
            max_escalations: self.max_escalations,
        }
    }
}

/// Per-k-point solver knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    pub nev: usize,
    pub tol: f64,
    pub maxit: usize,
    pub block_extra: Option<usize>,
    pub precond: PrecondKind,
    pub gamma: Option<f64>,
    pub shift: Option<f64>,
    pub mg_depth: Option<usize>,
    pub mg_smooth: [usize; 2],
    pub mg_cycles: usize,
    pub recompute_tol: f64,
    pub max_escalations: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        RunConfig::new(LatticeKind::Sc, Geometry::Homogeneous, 8).settings()
    }
}

/// Everything that does not depend on the Bloch vector.
#[derive(Clone, Debug)]
pub struct Problem {
    pub grid: GridSpec,
    pub lattice: LatticeSpec,
    pub m0: Arc<M0Diagonal>,
}

impl Problem {
    pub fn new(grid: GridSpec, lattice: LatticeSpec, model: &DielectricModel) -> Problem {
        let m0 = Arc::new(assemble_m0(&grid, &lattice, model));
        Problem { grid, lattice, m0 }
    }

    pub fn from_config(cfg: &RunConfig) -> Result<Problem> {
        let lattice = make_lattice(cfg.lattice, cfg.l)?;
        let grid = GridSpec::new(cfg.n, cfg.order_k())?;
        let model = DielectricModel::new(cfg.geometry, cfg.l, cfg.eps1, cfg.eps0)?;
        Ok(Problem::new(grid, lattice, &model))
    }
}

#[derive(Clone, Debug)]
pub struct KPointSolution {
    pub k: BlochVector,
    pub eig: EigResult,
    /// Penalty doublings needed to clear spurious pairs.
    pub escalations: usize,
    /// Final LOBPCG block, reusable as a warm start.
    pub block: Vec<Complex64>,
}

fn preconditioner(ops: &ShiftedOperators, settings: &SolveSettings, gamma: f64, c: f64, symbols: &crate::fft::FourierSymbols) -> Result<Option<Box<dyn LinearOperator>>> {
    Ok(match settings.precond {
        PrecondKind::Fft => Some(Box::new(FftPreconditioner::from_symbols(symbols.clone(), gamma, c)?)),
        PrecondKind::Mg => {
            let depth = settings.mg_depth.unwrap_or_else(|| auto_depth(ops.n()));
            let h = build_hierarchy(ops, gamma, c, depth)?.with_smoothing(settings.mg_smooth[0], settings.mg_smooth[1]);
            Some(Box::new(MgPreconditioner { hierarchy: h, cycles: settings.mg_cycles }))
        }
        PrecondKind::None => None,
    })
}

/// Solves for the lowest `nev` eigenpairs at one Bloch vector, escalating the
/// penalty while the Rayleigh recomputation flags intruders. At `k = 0` one of
/// the three constant-field zero modes is dropped so that bands stay continuous.
pub fn solve_kpoint(problem: &Problem, k: BlochVector, settings: &SolveSettings, seed: u64, warm: Option<&[Complex64]>) -> Result<KPointSolution> {
    let ops = ShiftedOperators::new(problem.grid, problem.lattice.clone(), k)?;
    let at_gamma = k.is_zero();
    let m = settings.nev + usize::from(at_gamma);
    let symbols = build_symbols(&ops);
    let mut gamma = settings.gamma.unwrap_or_else(|| penalty_gamma(problem.grid.h(), &k));
    let shift = if at_gamma { Some(settings.shift.unwrap_or_else(|| default_shift(&problem.lattice))) } else { None };
    let cfg = SolverConfig { m, block_extra: settings.block_extra, tol: settings.tol, maxit: settings.maxit, seed };
    let mut start: Option<&[Complex64]> = warm;
    let mut escalations = 0;
    let mut iterations = 0;
    loop {
        let op = CompensatedOperator::new(ops.clone(), (*problem.m0).clone(), gamma, shift)?;
        let c = op.shift_c;
        let pre = preconditioner(&ops, settings, gamma, c, &symbols)?;
        let out = lobpcg(&op, pre.as_deref(), &cfg, start)?;
        iterations += out.iterations;
        if !out.converged {
            let worst = out.residuals.iter().copied().fold(0.0, f64::max);
            return Err(Error::NotConverged { iterations, worst });
        }
        let n = op.dim();
        let mut idx: Vec<usize> = (0..m).collect();
        if at_gamma && m >= 3 {
            idx.remove(2);
        }
        let eig = EigResult {
            lambdas: idx.iter().map(|&i| out.values[i] - c).collect(),
            vectors: idx
                .iter()
                .map(|&i| VectorField::from_values(problem.grid.n, Space::Face, out.vectors[i * n..(i + 1) * n].to_vec()))
                .collect::<Result<_>>()?,
            residuals: idx.iter().map(|&i| out.residuals[i]).collect(),
            iterations,
            converged: true,
            gamma,
            shift_c: c,
            ..EigResult::default()
        };
        let eig = recompute_check(eig, &op, settings.recompute_tol)?;
        if !eig.any_spurious() {
            return Ok(KPointSolution { k, eig, escalations, block: out.block });
        }
        if escalations == settings.max_escalations {
            return Err(Error::Spurious { escalations, gamma });
        }
        escalations += 1;
        gamma = (2.0 * gamma).max(gamma_safe(&symbols, problem.m0.max(), m));
        // Gradient fields are exact eigenvectors of S, so restarting from the
        // polluted block would converge straight back to them.
        start = None;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Gap {
    /// 1-based index of the band below the gap.
    pub band: usize,
    pub omega_low: f64,
    pub omega_up: f64,
    pub ratio: f64,
}

/// Gap between band `n` and `n + 1` (1-based), where `bands[k][b]` holds the
/// frequencies at each k-point. Without `n`, the largest positive ratio is
/// returned, or `None` if no pair of bands is separated.
pub fn gap_ratio(bands: &[Vec<f64>], n: Option<usize>) -> Option<Gap> {
    let nev = bands.iter().map(Vec::len).min()?;
    let at = |n: usize| -> Gap {
        let low = bands.iter().map(|b| b[n - 1]).fold(f64::NEG_INFINITY, f64::max);
        let up = bands.iter().map(|b| b[n]).fold(f64::INFINITY, f64::min);
        let mid = 0.5 * (up + low);
        let ratio = if mid > 0.0 { (up - low) / mid } else { 0.0 };
        Gap { band: n, omega_low: low, omega_up: up, ratio }
    };
    match n {
        Some(n) if n >= 1 && n < nev => Some(at(n)),
        Some(_) => None,
        None => (1..nev).map(at).filter(|g| g.ratio > 0.0).max_by(|a, b| a.ratio.total_cmp(&b.ratio)),
    }
}

/// Per-k-point record kept in the band structure and written to the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KPointRecord {
    pub index: usize,
    pub label: Option<String>,
    pub k: [f64; 3],
    pub abscissa: f64,
    pub lambdas: Vec<f64>,
    pub lambdas_re: Vec<f64>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub gamma: f64,
    pub shift: f64,
    pub escalations: usize,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandStructure {
    pub l: f64,
    pub records: Vec<KPointRecord>,
    /// `bands[k][b]`: frequency `ω = sqrt(max(λ, 0))` of band `b` at k-point `k`.
    pub bands: Vec<Vec<f64>>,
    pub gap: Option<Gap>,
}

impl BandStructure {
    pub fn from_records(l: f64, records: Vec<KPointRecord>, gap_band: Option<usize>) -> BandStructure {
        let bands: Vec<Vec<f64>> = records.iter().map(|r| r.lambdas.iter().map(|&v| v.max(0.0).sqrt()).collect()).collect();
        let gap = gap_ratio(&bands, gap_band);
        BandStructure { l, records, bands, gap }
    }

    pub fn nev(&self) -> usize {
        self.bands.first().map_or(0, Vec::len)
    }

    /// Frequencies in units of `2π/l`.
    pub fn normalized(&self, omega: f64) -> f64 {
        omega * self.l / (2.0 * std::f64::consts::PI)
    }

    pub fn total_escalations(&self) -> usize {
        self.records.iter().map(|r| r.escalations).sum()
    }
}

fn solve_indexed(problem: &Problem, cfg: &RunConfig, index: usize, sample: &KSample, warm: Option<&[Complex64]>) -> Result<(KPointRecord, KPointSolution)> {
    let t = std::time::Instant::now();
    let sol = solve_kpoint(problem, sample.k, &cfg.settings(), cfg.seed.wrapping_add(index as u64), warm)
        .map_err(|e| Error::AtKPoint { index, k: sample.k.0, source: Box::new(e) })?;
    if let Some(dir) = &cfg.output.eigenvectors {
        crate::output::dump_eigenvectors(dir, index, &sol.eig)?;
    }
    let record = KPointRecord {
        index,
        label: sample.label.clone(),
        k: sample.k.0,
        abscissa: sample.abscissa,
        lambdas: sol.eig.lambdas.clone(),
        lambdas_re: sol.eig.lambdas_re.clone(),
        residuals: sol.eig.residuals.clone(),
        iterations: sol.eig.iterations,
        gamma: sol.eig.gamma,
        shift: sol.eig.shift_c,
        escalations: sol.escalations,
        seconds: t.elapsed().as_secs_f64(),
    };
    Ok((record, sol))
}

pub fn run_bandstructure(cfg: &RunConfig) -> Result<BandStructure> {
    run_bandstructure_with(cfg, |_| {})
}

/// As [`run_bandstructure`], calling `progress` after every finished k-point.
pub fn run_bandstructure_with<F>(cfg: &RunConfig, progress: F) -> Result<BandStructure>
where
    F: Fn(&KPointRecord) + Sync,
{
    cfg.validate()?;
    let problem = Problem::from_config(cfg)?;
    let samples = cfg.kpoints()?;
    let records = if cfg.warm_start {
        let mut records = Vec::with_capacity(samples.len());
        let mut warm: Option<Vec<Complex64>> = None;
        for (i, s) in samples.iter().enumerate() {
            let (rec, sol) = solve_indexed(&problem, cfg, i, s, warm.as_deref())?;
            progress(&rec);
            records.push(rec);
            warm = Some(sol.block);
        }
        records
    } else {
        samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let (rec, _) = solve_indexed(&problem, cfg, i, s, None)?;
                progress(&rec);
                Ok(rec)
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(BandStructure::from_records(cfg.l, records, cfg.gap_band))
}
