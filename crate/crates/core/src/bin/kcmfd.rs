use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use kcmfd::accuracy::{exact_iso_eigs, verify_order};
use kcmfd::bands::{run_bandstructure_with, solve_kpoint, PrecondKind, Problem, RunConfig};
use kcmfd::dielectric::Geometry;
use kcmfd::output::{csv_string, dump_eigenvectors, emit_outputs};
use kcmfd::{BlochVector, Error, LatticeKind};

#[derive(Parser)]
#[command(name = "kcmfd", version, about = "Photonic band structures with kernel-compensated mimetic finite differences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep a k-path described by a JSON config.
    Bands {
        config: PathBuf,
        #[arg(long = "N")]
        n: Option<usize>,
        #[arg(long)]
        order: Option<usize>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        warm_start: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Eigenvalues at a single Bloch vector.
    Eig {
        #[arg(long, default_value = "sc")]
        lattice: String,
        #[arg(long, default_value_t = 1.0)]
        l: f64,
        /// Bloch vector as `kx,ky,kz`.
        #[arg(long, value_parser = parse_k, allow_hyphen_values = true)]
        k: BlochVector,
        #[arg(long = "N")]
        n: usize,
        #[arg(long, default_value_t = 2)]
        order: usize,
        #[arg(long, default_value = "homogeneous")]
        geometry: String,
        #[arg(long, default_value_t = 1.0)]
        eps0: f64,
        #[arg(long, default_value_t = 1.0)]
        eps1: f64,
        /// Print the result as JSON.
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Convergence study of the homogeneous SC problem against exact eigenvalues.
    VerifyOrder {
        #[arg(long, value_delimiter = ',', default_value = "2,4,6,8")]
        orders: Vec<usize>,
        #[arg(long = "N", value_delimiter = ',', default_value = "10,20,40,80")]
        n: Vec<usize>,
        #[arg(long, value_parser = parse_k, default_value = "0.5,0,0", allow_hyphen_values = true)]
        k: BlochVector,
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        l: f64,
        #[arg(long, default_value_t = 6)]
        nev: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        json: bool,
    },
    /// Exact eigenvalues of the homogeneous medium.
    Exact {
        #[arg(long, value_parser = parse_k, allow_hyphen_values = true)]
        k: BlochVector,
        #[arg(long)]
        l: f64,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long)]
    nev: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    maxit: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// fft, mg or none.
    #[arg(long)]
    precond: Option<String>,
    #[arg(long)]
    mg_depth: Option<usize>,
    /// Pre- and post-smoothing sweeps, e.g. `2,2`.
    #[arg(long, value_delimiter = ',')]
    mg_smooth: Option<Vec<usize>>,
    #[arg(long)]
    mg_cycles: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    shift: Option<f64>,
    /// Directory for one binary field dump per k-point and band.
    #[arg(long)]
    dump_eigenvectors: Option<PathBuf>,
}

impl SolverArgs {
    fn apply(&self, cfg: &mut RunConfig) -> Result<(), Error> {
        if let Some(v) = self.nev {
            cfg.nev = v;
        }
        if let Some(v) = self.tol {
            cfg.tol = v;
        }
        if let Some(v) = self.maxit {
            cfg.maxit = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(p) = &self.precond {
            cfg.precond = p.parse::<PrecondKind>()?;
        }
        if self.mg_depth.is_some() {
            cfg.mg_depth = self.mg_depth;
        }
        if let Some(s) = &self.mg_smooth {
            let [a, b] = s[..] else {
                return Err(Error::Config(format!("--mg-smooth takes two counts, got {s:?}")));
            };
            cfg.mg_smooth = [a, b];
        }
        if let Some(v) = self.mg_cycles {
            cfg.mg_cycles = v;
        }
        if self.gamma.is_some() {
            cfg.gamma = self.gamma;
        }
        if self.shift.is_some() {
            cfg.shift = self.shift;
        }
        if self.dump_eigenvectors.is_some() {
            cfg.output.eigenvectors = self.dump_eigenvectors.clone();
        }
        Ok(())
    }
}

fn config_err(e: Error) -> Error {
    match e {
        Error::InvalidParameter(m) => Error::Config(m),
        other => other,
    }
}

fn parse_k(s: &str) -> Result<BlochVector, String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>()).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    match v[..] {
        [x, y, z] => Ok(BlochVector([x, y, z])),
        _ => Err(format!("expected three comma-separated numbers, got {}", v.len())),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Bands { config, n, order, csv, svg, manifest, samples, warm_start, solver } => {
            let mut cfg = RunConfig::from_file(&config)?;
            if let Some(v) = n {
                cfg.n = v;
            }
            if let Some(v) = order {
                cfg.order = v;
            }
            if samples.is_some() {
                cfg.kpath.samples_per_segment = samples;
            }
            cfg.warm_start |= warm_start;
            cfg.output.csv = csv.or(cfg.output.csv);
            cfg.output.svg = svg.or(cfg.output.svg);
            cfg.output.manifest = manifest.or(cfg.output.manifest);
            solver.apply(&mut cfg)?;
            cfg.validate()?;
            let t = Instant::now();
            let bs = run_bandstructure_with(&cfg, |r| {
                eprintln!("k[{:3}] {:?} iterations {} escalations {} ({:.1} s)", r.index, r.k, r.iterations, r.escalations, r.seconds)
            })?;
            let seconds = t.elapsed().as_secs_f64();
            emit_outputs(&bs, &cfg, seconds)?;
            if cfg.output.csv.is_none() {
                print!("{}", csv_string(&bs));
            }
            match bs.gap {
                Some(g) => eprintln!("gap above band {}: [{:.6}, {:.6}], ratio {:.5}", g.band, g.omega_low, g.omega_up, g.ratio),
                None => eprintln!("no gap among the computed bands"),
            }
            eprintln!("{} k-points in {seconds:.1} s", bs.records.len());
        }
        Command::Eig { lattice, l, k, n, order, geometry, eps0, eps1, json, solver } => {
            let lattice: LatticeKind = lattice.parse().map_err(config_err)?;
            let geometry: Geometry = geometry.parse().map_err(config_err)?;
            let mut cfg = RunConfig::new(lattice, geometry, n);
            cfg.l = l;
            cfg.order = order;
            cfg.eps0 = eps0;
            cfg.eps1 = eps1;
            cfg.kpath.points = Some(vec![k.0]);
            solver.apply(&mut cfg)?;
            cfg.validate()?;
            let problem = Problem::from_config(&cfg)?;
            let sol = solve_kpoint(&problem, k, &cfg.settings(), cfg.seed, None)?;
            if let Some(dir) = &cfg.output.eigenvectors {
                dump_eigenvectors(dir, 0, &sol.eig)?;
            }
            let e = &sol.eig;
            if json {
                let v = serde_json::json!({
                    "k": k.0, "lambdas": e.lambdas, "lambdas_re": e.lambdas_re, "residuals": e.residuals,
                    "iterations": e.iterations, "gamma": e.gamma, "shift": e.shift_c, "escalations": sol.escalations,
                });
                println!("{}", serde_json::to_string_pretty(&v)?);
            } else {
                println!("{:>4} {:>22} {:>22} {:>10}", "band", "lambda", "omega", "residual");
                for (i, (lam, r)) in e.lambdas.iter().zip(&e.residuals).enumerate() {
                    println!("{:>4} {lam:>22.15e} {:>22.15e} {r:>10.2e}", i + 1, lam.max(0.0).sqrt());
                }
                println!("iterations {} gamma {:.4e} escalations {}", e.iterations, e.gamma, sol.escalations);
            }
        }
        Command::VerifyOrder { orders, n, k, l, nev, tol, json } => {
            let table = verify_order(&orders, &n, k, l, nev, tol).map_err(config_err)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&table)?);
            } else {
                print!("{}", table.to_text());
            }
        }
        Command::Exact { k, l, count } => {
            if !(l > 0.0) || count == 0 {
                return Err(Error::Config("need l > 0 and count >= 1".into()));
            }
            for v in exact_iso_eigs(&k, l, count) {
                println!("{v:.15e}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_solver_failure() {
                ExitCode::from(2)
            } else if matches!(e, Error::Config(_) | Error::InvalidParameter(_) | Error::Json(_)) {
                ExitCode::from(3)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
