//! Acceptance suite. Runs as a plain binary so every criterion prints one
//! PASS/FAIL line in the test log.
//!
//! `cargo test --test acceptance -- 3 5` runs selected criteria;
//! `-- --ignored` adds the N=128 band-gap run.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use kcmfd::accuracy::verify_order;
use kcmfd::bands::{run_bandstructure_with, solve_kpoint, Problem, RunConfig, SolveSettings};
use kcmfd::compensation::{default_shift, penalty_gamma, CompensatedOperator};
use kcmfd::dense::{dense_assemble, generalized_eigenvalues, hermitian_eigenvalues, DenseKind};
use kcmfd::dielectric::{assemble_m0, DielectricModel, Geometry, M0Diagonal};
use kcmfd::fft::{build_symbols, solve_p, Fft3};
use kcmfd::grid::{inner, norm};
use kcmfd::multigrid::{auto_depth, build_hierarchy};
use kcmfd::{make_lattice, BlochVector, Complex64, GridSpec, LatticeKind, ScalarField, ShiftedOperators, Space, VectorField};

const LATTICES: [LatticeKind; 3] = [LatticeKind::Sc, LatticeKind::Fcc, LatticeKind::Bcc];

struct Report {
    lines: Vec<(bool, String)>,
}

impl Report {
    fn line(&mut self, id: &str, ok: bool, detail: String) {
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id}: {detail}");
        self.lines.push((ok, id.to_string()));
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_vec(len: usize, r: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..len).map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))).collect()
}

fn random_k(r: &mut ChaCha8Rng) -> BlochVector {
    BlochVector([r.random_range(-2.0 * PI..2.0 * PI), r.random_range(-2.0 * PI..2.0 * PI), r.random_range(-2.0 * PI..2.0 * PI)])
}

fn ops(kind: LatticeKind, n: usize, order_k: usize, k: BlochVector) -> ShiftedOperators {
    ShiftedOperators::new(GridSpec::new(n, order_k).unwrap(), make_lattice(kind, 1.0).unwrap(), k).unwrap()
}

fn native(kind: LatticeKind) -> (Geometry, f64) {
    match kind {
        LatticeKind::Sc => (Geometry::ScCurved, 13.0),
        LatticeKind::Bcc => (Geometry::BccSingleGyroid, 16.0),
        LatticeKind::Fcc => (Geometry::FccDiamond, 13.0),
    }
}

fn corner_k() -> BlochVector {
    BlochVector([PI, PI, PI])
}

// ---------------------------------------------------------------------------

fn criterion_1(rep: &mut Report) {
    let t = Instant::now();
    // Reference errors for eigenvalues 3–4 and 5–6 at N = 10, 20, 40, 80.
    let tables: [(usize, &[usize], [&[f64]; 2]); 4] = [
        (2, &[10, 20, 40, 80], [&[8.17e-3, 2.05e-3, 5.14e-4, 1.28e-4], &[3.25e-2, 8.20e-3, 2.05e-3, 5.14e-4]]),
        (4, &[10, 20, 40], [&[1.05e-3, 6.78e-5, 4.27e-6], &[1.43e-3, 9.08e-5, 5.70e-6]]),
        (6, &[10, 20, 40], [&[1.00e-4, 1.65e-6, 2.61e-8], &[8.18e-5, 1.33e-6, 2.09e-8]]),
        (8, &[10, 20, 40], [&[9.16e-6, 3.85e-8, 1.53e-10], &[5.35e-6, 2.21e-8, 8.75e-11]]),
    ];
    let k = BlochVector([0.5, 0.0, 0.0]);
    for (order, ns, refs) in tables {
        let table = match verify_order(&[order], ns, k, 2.0 * PI, 6, 1e-9) {
            Ok(t) => t,
            Err(e) => {
                rep.line(&format!("1 order {order}"), false, format!("solver error {e}"));
                continue;
            }
        };
        let mut worst_exact: f64 = 0.0;
        let mut worst_rel: f64 = 0.0;
        for (i, row) in table.rows.iter().enumerate() {
            worst_exact = worst_exact.max(row.errors[0]).max(row.errors[1]);
            for e in 2..6 {
                let r = refs[(e - 2) / 2][i];
                worst_rel = worst_rel.max((row.errors[e] - r).abs() / r);
            }
        }
        let rate_tol = if order == 2 { 0.1 } else { 0.15 };
        let mut worst_rate: f64 = 0.0;
        let mut rates = Vec::new();
        for (_, _, r) in table.rates(order) {
            for v in &r[2..6] {
                worst_rate = worst_rate.max((v - order as f64).abs());
            }
            rates.push(format!("{:.2}", r[2]));
        }
        let ok = worst_exact <= 1e-12 && worst_rel <= 0.10 && worst_rate <= rate_tol;
        rep.line(
            &format!("1 order {order}"),
            ok,
            format!(
                "N={ns:?}: eigs 1-2 max err {worst_exact:.1e} (<= 1e-12), eigs 3-6 max deviation from reference errors {:.1}% (<= 10%), rates [{}] max |rate-{order}| {worst_rate:.3} (<= {rate_tol})",
                100.0 * worst_rel,
                rates.join(", ")
            ),
        );
    }
    let s = t.elapsed().as_secs_f64();
    rep.line("1 runtime", s < 300.0, format!("{s:.1} s (< 300 s)"));
}

fn criterion_2(rep: &mut Report) {
    let mut r = rng(2);
    let mut worst_chain: f64 = 0.0;
    let mut worst_adj: f64 = 0.0;
    let mut floor: f64 = 0.0;
    let mut cases = 0;
    for kind in LATTICES {
        for order_k in 1..=4 {
            for n in [4usize, 8] {
                for trial in 0..5 {
                    let k = if trial == 0 { BlochVector::ZERO } else { random_k(&mut r) };
                    let o = ops(kind, n, order_k, k);
                    let s = n * n * n;
                    let phi = ScalarField::from_values(n, Space::Node, random_vec(s, &mut r)).unwrap();
                    let ue = VectorField::from_values(n, Space::Edge, random_vec(3 * s, &mut r)).unwrap();
                    let vf = VectorField::from_values(n, Space::Face, random_vec(3 * s, &mut r)).unwrap();
                    let psi = ScalarField::from_values(n, Space::Cell, random_vec(s, &mut r)).unwrap();

                    let g = o.apply_grad_k(&phi).unwrap();
                    // Rounding floor of the cancellation D_i D_j - D_j D_i.
                    floor = floor.max(f64::EPSILON * (g.norm() / phi.norm()).powi(2));
                    worst_chain = worst_chain.max(o.apply_curl_k(&g).unwrap().norm() / phi.norm());
                    let cu = o.apply_curl_k(&ue).unwrap();
                    worst_chain = worst_chain.max(o.apply_div_k(&cu).unwrap().norm() / ue.norm());

                    let pairs = [
                        (inner(&g.values, &ue.values), inner(&phi.values, &o.apply_grad_k_adj(&ue).unwrap().values), g.norm() * ue.norm()),
                        (inner(&cu.values, &vf.values), inner(&ue.values, &o.apply_curl_k_adj(&vf).unwrap().values), cu.norm() * vf.norm()),
                        {
                            let d = o.apply_div_k(&vf).unwrap();
                            (inner(&d.values, &psi.values), inner(&vf.values, &o.apply_div_k_adj(&psi).unwrap().values), d.norm() * psi.norm())
                        },
                    ];
                    for (a, b, scale) in pairs {
                        worst_adj = worst_adj.max((a - b).norm() / scale.max(f64::MIN_POSITIVE));
                    }
                    cases += 1;
                }
            }
        }
    }
    rep.line(
        "2",
        worst_chain <= 1e-13 && worst_adj <= 1e-12,
        format!("{cases} cases: max chain residual {worst_chain:.1e} (<= 1e-13; eps*||GRAD||^2 = {floor:.1e}), max adjoint mismatch {worst_adj:.1e} (<= 1e-12)"),
    );
}

fn criterion_3(rep: &mut Report) {
    let mut r = rng(3);
    let mut worst: f64 = 0.0;
    let mut nullity_ok = true;
    let mut nullities = Vec::new();
    let mut cases = 0;
    for kind in LATTICES {
        for trial in 0..3 {
            let k = if trial == 0 { BlochVector::ZERO } else { random_k(&mut r) };
            let o = ops(kind, 4, 1, k);
            let c = dense_assemble(DenseKind::Curl, &o).unwrap();
            let d = dense_assemble(DenseKind::Div, &o).unwrap();
            let la = hermitian_eigenvalues(&(&c * c.adjoint()));
            let lb = hermitian_eigenvalues(&(d.adjoint() * &d));
            for gamma in [0.5, 2.0, 37.0] {
                let op = CompensatedOperator::with_raw_shift(o.clone(), M0Diagonal::identity(o.grid.vector_len()), gamma, 0.0).unwrap();
                let s = dense_assemble(DenseKind::S(&op), &o).unwrap();
                let ls = hermitian_eigenvalues(&s);
                let scale = ls.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let cut = 1e-9 * scale;
                let nonzero_s: Vec<f64> = ls.iter().copied().filter(|v| v.abs() > cut).collect();
                let mut union: Vec<f64> = la.iter().copied().filter(|v| v.abs() > cut).collect();
                union.extend(lb.iter().map(|v| gamma * v).filter(|v| v.abs() > cut));
                union.sort_by(|a, b| a.total_cmp(b));
                if union.len() != nonzero_s.len() {
                    worst = f64::INFINITY;
                } else {
                    for (a, b) in union.iter().zip(&nonzero_s) {
                        worst = worst.max((a - b).abs() / scale);
                    }
                }
                let nullity = ls.len() - nonzero_s.len();
                let expect = if k.is_zero() { 3 } else { 0 };
                nullity_ok &= nullity == expect;
                if trial == 0 || nullity != expect {
                    nullities.push(format!("{kind} k={} γ={gamma}: {nullity}", if k.is_zero() { "0" } else { "rand" }));
                }
                cases += 1;
            }
        }
    }
    rep.line(
        "3",
        worst <= 1e-9 && nullity_ok,
        format!("{cases} cases at N=4: max |spec(S) - union| / max eig {worst:.1e} (<= 1e-9); nullities at k=0 [{}] (expected 3, and 0 elsewhere)", nullities.join("; ")),
    );
}

fn criterion_4(rep: &mut Report) {
    let mut r = rng(4);
    let n = 8;
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for kind in LATTICES {
        for order_k in 1..=4 {
            for with_k in [false, true] {
                let k = if with_k { random_k(&mut r) } else { BlochVector::ZERO };
                let o = ops(kind, n, order_k, k);
                let symbols = build_symbols(&o);
                let fft = Fft3::new(n);
                let c = if k.is_zero() { default_shift(&o.lattice) } else { 0.0 };
                for gamma in [1.0, 2.0 / o.grid.h()] {
                    let b = random_vec(o.grid.vector_len(), &mut r);
                    let x = solve_p(&b, &symbols, &fft, gamma, c).unwrap();
                    let p = CompensatedOperator::with_raw_shift(o.clone(), M0Diagonal::identity(o.grid.vector_len()), gamma, c).unwrap();
                    let mut px = vec![Complex64::new(0.0, 0.0); b.len()];
                    p.apply_raw(&x, &mut px);
                    let res: Vec<Complex64> = px.iter().zip(&b).map(|(a, b)| a - b).collect();
                    worst = worst.max(norm(&res) / norm(&b));
                    cases += 1;
                }
            }
        }
    }
    rep.line("4 roundtrip", worst <= 1e-10, format!("{cases} cases at N={n}: max ||P x - b|| / ||b|| {worst:.1e} (<= 1e-10)"));

    let mut all_ok = true;
    let mut details = Vec::new();
    for kind in LATTICES {
        let (geometry, ratio) = native(kind);
        for with_k in [false, true] {
            let k = if with_k { random_k(&mut r) } else { BlochVector::ZERO };
            let o = ops(kind, 4, 1, k);
            let model = DielectricModel::new(geometry, 1.0, ratio, 1.0).unwrap();
            let m0 = assemble_m0(&o.grid, &o.lattice, &model);
            let (bmin, bmax) = (m0.min(), m0.max());
            let gamma = penalty_gamma(o.grid.h(), &k);
            let op = CompensatedOperator::new(o.clone(), m0, gamma, None).unwrap();
            let s = dense_assemble(DenseKind::S(&op), &o).unwrap();
            let p = dense_assemble(DenseKind::P { gamma, c: op.shift_c }, &o).unwrap();
            match generalized_eigenvalues(&s, &p) {
                Ok(ev) => {
                    let (lo, hi) = (ev[0], ev[ev.len() - 1]);
                    let ok = lo >= bmin * (1.0 - 1e-10) && hi <= bmax * (1.0 + 1e-10) && bmin < bmax;
                    all_ok &= ok;
                    details.push(format!("{kind} k={}: [{lo:.4}, {hi:.4}] in [{bmin:.4}, {bmax:.4}]", if with_k { "rand" } else { "0" }));
                }
                Err(e) => {
                    all_ok = false;
                    details.push(format!("{kind}: {e}"));
                }
            }
        }
    }
    rep.line("4 conditioning", all_ok, format!("eig(S, P) at N=4, eps ratio 13/16: {}", details.join("; ")));
}

fn criterion_5(rep: &mut Report) {
    let t = Instant::now();
    let mut r = rng(5);
    let n = 32;
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for kind in LATTICES {
        let k = random_k(&mut r);
        let o = ops(kind, n, 1, k);
        let symbols = build_symbols(&o);
        let fft = Fft3::new(n);
        for gamma in [1.0, 10.0] {
            let b = random_vec(o.grid.vector_len(), &mut r);
            let xf = solve_p(&b, &symbols, &fft, gamma, 0.0).unwrap();
            match build_hierarchy(&o, gamma, 0.0, auto_depth(n)).and_then(|h| h.distributive_solve(&b, 1e-12, 100)) {
                Ok(sol) => {
                    let d: Vec<Complex64> = sol.x.iter().zip(&xf).map(|(a, b)| a - b).collect();
                    worst = worst.max(norm(&d) / norm(&xf));
                }
                Err(_) => ok = false,
            }
        }
    }
    ok &= worst <= 1e-6;
    rep.line("5 agreement", ok, format!("N={n}, 3 lattices, gamma 1 and 10: max ||x_mg - x_fft|| / ||x_fft|| {worst:.1e} (<= 1e-6)"));

    let k = BlochVector([0.9, -0.4, 1.7]);
    let mut counts = Vec::new();
    let mut spread_ok = true;
    for gamma in [1.0, 10.0] {
        let mut c = Vec::new();
        for n in [16usize, 32, 64] {
            let o = ops(LatticeKind::Sc, n, 1, k);
            let b = random_vec(o.grid.vector_len(), &mut r);
            let cycles = build_hierarchy(&o, gamma, 0.0, auto_depth(n)).and_then(|h| h.distributive_solve(&b, 1e-8, 200)).map(|s| s.cycles).unwrap_or(usize::MAX);
            c.push(cycles);
        }
        spread_ok &= c[0].abs_diff(c[2]) <= 2;
        counts.push(format!("gamma {gamma}: N=16/32/64 -> {c:?}"));
    }
    rep.line("5 grid independence", spread_ok, format!("V-cycles to 1e-8: {} (|N16 - N64| <= 2)", counts.join("; ")));
    let s = t.elapsed().as_secs_f64();
    rep.line("5 runtime", s < 120.0, format!("{s:.1} s (< 120 s)"));
}

fn criterion_6(rep: &mut Report) {
    let n = 48;
    for kind in LATTICES {
        let (geometry, ratio) = native(kind);
        let model = DielectricModel::new(geometry, 1.0, ratio, 1.0).unwrap();
        let problem = Problem::new(GridSpec::new(n, 1).unwrap(), make_lattice(kind, 1.0).unwrap(), &model);
        let settings = SolveSettings { nev: 10, ..SolveSettings::default() };
        let plain = solve_kpoint(&problem, corner_k(), &settings, 6, None);
        let (ok, detail) = match &plain {
            Ok(s) => (s.escalations == 0 && !s.eig.any_spurious(), format!("gamma {:.1}, escalations {}, spurious {}", s.eig.gamma, s.escalations, s.eig.any_spurious())),
            Err(e) => (false, e.to_string()),
        };
        rep.line(&format!("6 {geometry}"), ok, format!("N={n}, nev=10, k=(pi,pi,pi): {detail}"));

        let tiny = SolveSettings { gamma: Some(1e-4), ..settings };
        let (ok, detail) = match solve_kpoint(&problem, corner_k(), &tiny, 6, None) {
            Ok(s) => {
                let ok = (1..=6).contains(&s.escalations) && !s.eig.any_spurious();
                let agree = plain.as_ref().map(|p| p.eig.lambdas.iter().zip(&s.eig.lambdas).map(|(a, b)| (a - b).abs() / a).fold(0.0, f64::max)).unwrap_or(f64::NAN);
                (ok, format!("{} escalation(s) to gamma {:.2}, max rel. deviation from default-gamma run {agree:.1e}", s.escalations, s.eig.gamma))
            }
            Err(e) => (false, e.to_string()),
        };
        rep.line(&format!("6 {geometry} gamma=1e-4"), ok, detail);
    }
}

fn gap_run(rep: &mut Report, n: usize, tol_rel: f64, tag: &str) -> f64 {
    let t = Instant::now();
    let sequential = std::thread::available_parallelism().map(|p| p.get() == 1).unwrap_or(true);
    for (kind, target) in [(LatticeKind::Sc, 0.14019), (LatticeKind::Bcc, 0.31745), (LatticeKind::Fcc, 0.31182)] {
        let (geometry, ratio) = native(kind);
        let mut cfg = RunConfig::new(kind, geometry, n);
        cfg.eps1 = ratio;
        cfg.nev = 10;
        cfg.tol = 1e-4;
        cfg.kpath.samples_per_segment = Some(1);
        cfg.warm_start = sequential;
        let tk = Instant::now();
        match run_bandstructure_with(&cfg, |_| {}) {
            Ok(bs) => {
                let (ok, detail) = match bs.gap {
                    Some(g) => {
                        let dev = (g.ratio - target) / target;
                        (dev.abs() <= tol_rel, format!("ratio {:.5} above band {} vs {target} ({:+.2}%, limit ±{}%)", g.ratio, g.band, 100.0 * dev, 100.0 * tol_rel))
                    }
                    None => (false, "no gap found".to_string()),
                };
                rep.line(&format!("{tag} {geometry}"), ok, format!("N={n}, {} k-points, {:.0} s: {detail}", bs.records.len(), tk.elapsed().as_secs_f64()));
            }
            Err(e) => rep.line(&format!("{tag} {geometry}"), false, e.to_string()),
        }
    }
    t.elapsed().as_secs_f64()
}

fn criterion_7(rep: &mut Report, long: bool) {
    let s = gap_run(rep, 64, 0.05, "7");
    let threads = rayon::current_num_threads();
    rep.line("7 runtime", s <= 1800.0, format!("{s:.0} s for the N=64 runs on {threads} thread(s) (<= 1800 s)"));
    if long {
        gap_run(rep, 128, 0.015, "7 N=128");
    }
}

fn criterion_8(rep: &mut Report) {
    let n = 64;
    let cases = [
        ("homogeneous", LatticeKind::Sc, Geometry::Homogeneous, 1.0, 13usize),
        ("sc_curved", LatticeKind::Sc, Geometry::ScCurved, 13.0, 44),
        ("bcc_single_gyroid", LatticeKind::Bcc, Geometry::BccSingleGyroid, 16.0, 70),
        ("fcc_diamond", LatticeKind::Fcc, Geometry::FccDiamond, 13.0, 56),
    ];
    for (name, kind, geometry, ratio, reference) in cases {
        let model = DielectricModel::new(geometry, 1.0, ratio, 1.0).unwrap();
        let problem = Problem::new(GridSpec::new(n, 1).unwrap(), make_lattice(kind, 1.0).unwrap(), &model);
        let settings = SolveSettings { nev: 10, ..SolveSettings::default() };
        match solve_kpoint(&problem, corner_k(), &settings, 8, None) {
            Ok(s) => {
                let it = s.eig.iterations;
                let ok = (8..=120).contains(&it) && it * 2 >= reference && it <= 2 * reference;
                rep.line(&format!("8 {name}"), ok, format!("N={n}, k=(pi,pi,pi): {it} iterations (reference {reference}, window [8, 120] and factor 2)"));
            }
            Err(e) => rep.line(&format!("8 {name}"), false, e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let long = args.iter().any(|a| a == "--ignored" || a == "--include-ignored");
    let selected: Vec<usize> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let want = |c: usize| selected.is_empty() || selected.contains(&c);
    let mut rep = Report { lines: Vec::new() };
    let t = Instant::now();
    if want(1) {
        criterion_1(&mut rep);
    }
    if want(2) {
        criterion_2(&mut rep);
    }
    if want(3) {
        criterion_3(&mut rep);
    }
    if want(4) {
        criterion_4(&mut rep);
    }
    if want(5) {
        criterion_5(&mut rep);
    }
    if want(6) {
        criterion_6(&mut rep);
    }
    if want(8) {
        criterion_8(&mut rep);
    }
    if want(7) {
        criterion_7(&mut rep, long);
    }
    let failed: Vec<&str> = rep.lines.iter().filter(|(ok, _)| !ok).map(|(_, id)| id.as_str()).collect();
    println!(
        "acceptance: {} checks, {} passed, {} failed in {:.0} s{}",
        rep.lines.len(),
        rep.lines.len() - failed.len(),
        failed.len(),
        t.elapsed().as_secs_f64(),
        if failed.is_empty() { String::new() } else { format!(" (failed: {})", failed.join(", ")) }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
