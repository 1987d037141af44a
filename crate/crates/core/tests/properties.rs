use std::f64::consts::PI;

use proptest::prelude::*;

use kcmfd::accuracy::exact_iso_eigs;
use kcmfd::bands::{gap_ratio, run_bandstructure, BandStructure, KPointRecord, RunConfig};
use kcmfd::compensation::CompensatedOperator;
use kcmfd::dielectric::{assemble_m0, DielectricModel, Geometry, M0Diagonal};
use kcmfd::fft::{build_symbols, solve_p, Fft3};
use kcmfd::grid::{inner, read_field_dump, write_field_dump};
use kcmfd::output::{csv_string, read_csv};
use kcmfd::{make_lattice, BlochVector, Complex64, GridSpec, LatticeKind, ShiftedOperators, Space, VectorField};

fn lattice_kind() -> impl Strategy<Value = LatticeKind> {
    prop_oneof![Just(LatticeKind::Sc), Just(LatticeKind::Fcc), Just(LatticeKind::Bcc)]
}

fn bloch() -> impl Strategy<Value = BlochVector> {
    prop::array::uniform3(-7.0f64..7.0).prop_map(BlochVector)
}

fn field(len: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Complex64::new(a, b)), len)
}

fn record(index: usize, lambdas: Vec<f64>) -> KPointRecord {
    KPointRecord {
        index,
        label: (index % 2 == 0).then(|| format!("P{index}")),
        k: [0.1 * index as f64, -0.3, 1.0 / 3.0],
        abscissa: index as f64 * 0.7,
        lambdas_re: lambdas.clone(),
        residuals: vec![0.0; lambdas.len()],
        lambdas,
        iterations: 1,
        gamma: 1.0,
        shift: 0.0,
        escalations: 0,
        seconds: 0.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gap_ratio_is_scale_consistent(
        bands in prop::collection::vec(prop::collection::vec(0.01f64..10.0, 4), 1..6),
        s in 0.01f64..100.0,
    ) {
        let sorted: Vec<Vec<f64>> = bands.into_iter().map(|mut b| { b.sort_by(f64::total_cmp); b }).collect();
        let scaled: Vec<Vec<f64>> = sorted.iter().map(|b| b.iter().map(|v| v * s).collect()).collect();
        for n in 1..4 {
            let a = gap_ratio(&sorted, Some(n)).unwrap();
            let b = gap_ratio(&scaled, Some(n)).unwrap();
            prop_assert!((a.ratio - b.ratio).abs() <= 1e-12 * (1.0 + a.ratio.abs()));
        }
        prop_assert_eq!(gap_ratio(&sorted, None).map(|g| g.band), gap_ratio(&scaled, None).map(|g| g.band));
    }

    #[test]
    fn csv_roundtrip_is_bit_identical(lams in prop::collection::vec(prop::collection::vec(0.0f64..1e3, 3), 1..5), l in 0.1f64..10.0) {
        let records: Vec<KPointRecord> = lams.into_iter().enumerate().map(|(i, mut v)| { v.sort_by(f64::total_cmp); record(i, v) }).collect();
        let bs = BandStructure::from_records(l, records, None);
        let rows = read_csv(&csv_string(&bs)).unwrap();
        prop_assert_eq!(rows.len(), bs.records.len());
        for (row, (rec, omega)) in rows.iter().zip(bs.records.iter().zip(&bs.bands)) {
            prop_assert_eq!(&row.bands, omega);
            prop_assert_eq!(row.k, rec.k);
            prop_assert_eq!(row.abscissa, rec.abscissa);
            prop_assert_eq!(&row.label, &rec.label);
        }
    }

    #[test]
    fn exact_spectrum_is_sorted_and_paired(k in bloch(), l in 0.5f64..8.0, half in 1usize..12) {
        let v = exact_iso_eigs(&k, l, 2 * half);
        prop_assert!(v.windows(2).all(|w| w[0] <= w[1]));
        for p in v.chunks(2) {
            prop_assert_eq!(p[0], p[1]);
        }
        let kn = k.norm();
        let g = 2.0 * PI / l;
        // The smallest value is at most |k|² and never below dist(k, reciprocal lattice)².
        prop_assert!(v[0] <= kn * kn + 1e-12);
        prop_assert!(v[0] >= 0.0 && v[0] <= 0.75 * g * g + 1e-9);
    }

    #[test]
    fn compensated_operator_is_hermitian_positive(kind in lattice_kind(), k in bloch(), gamma in 0.1f64..50.0, x in field(3 * 64), y in field(3 * 64)) {
        let ops = ShiftedOperators::new(GridSpec::new(4, 1).unwrap(), make_lattice(kind, 1.0).unwrap(), k).unwrap();
        let model = DielectricModel::new(Geometry::Homogeneous, 1.0, 1.0, 1.0).unwrap();
        let m0 = assemble_m0(&ops.grid, &ops.lattice, &model);
        let op = CompensatedOperator::new(ops, m0, gamma, None).unwrap();
        let mut sx = vec![Complex64::new(0.0, 0.0); x.len()];
        let mut sy = sx.clone();
        op.apply_raw(&x, &mut sx);
        op.apply_raw(&y, &mut sy);
        let a = inner(&y, &sx);
        let b = inner(&sy, &x);
        let scale = kcmfd::grid::norm(&sx) * kcmfd::grid::norm(&y) + kcmfd::grid::norm(&sy) * kcmfd::grid::norm(&x);
        prop_assert!((a - b).norm() <= 1e-12 * scale);
        prop_assert!(inner(&x, &sx).re >= -1e-12 * scale);
    }

    #[test]
    fn fft_solve_inverts_p(kind in lattice_kind(), k in bloch(), order_k in 1usize..=4, gamma in 0.5f64..40.0, b in field(3 * 216)) {
        prop_assume!(k.norm() > 0.1);
        let ops = ShiftedOperators::new(GridSpec::new(6, order_k).unwrap(), make_lattice(kind, 1.0).unwrap(), k).unwrap();
        let x = solve_p(&b, &build_symbols(&ops), &Fft3::new(6), gamma, 0.0).unwrap();
        let p = CompensatedOperator::with_raw_shift(ops, M0Diagonal::identity(b.len()), gamma, 0.0).unwrap();
        let mut px = vec![Complex64::new(0.0, 0.0); b.len()];
        p.apply_raw(&x, &mut px);
        let r: Vec<Complex64> = px.iter().zip(&b).map(|(a, c)| a - c).collect();
        prop_assert!(kcmfd::grid::norm(&r) <= 1e-9 * kcmfd::grid::norm(&b));
    }

    #[test]
    fn field_dump_roundtrip(n in 2usize..5, face in any::<bool>(), seed in any::<u64>()) {
        let space = if face { Space::Face } else { Space::Edge };
        let len = 3 * n * n * n;
        let values: Vec<Complex64> = (0..len).map(|i| Complex64::new((seed as f64 + i as f64).sin(), i as f64)).collect();
        let f = VectorField::from_values(n, space, values).unwrap();
        let mut buf = Vec::new();
        write_field_dump(&mut buf, f.n, f.space, &f.values).unwrap();
        prop_assert_eq!(buf.len(), 16 + 16 * len);
        let (m, s, v) = read_field_dump(&buf[..]).unwrap();
        prop_assert_eq!((m, s), (n, space));
        prop_assert_eq!(v, f.values);
    }
}

#[test]
fn bands_are_invariant_under_path_permutation() {
    let points = vec![[0.4, 0.0, 0.0], [0.0, 1.1, 0.3], [2.0, 2.0, 0.5], [0.0, 0.0, 0.0]];
    let mut cfg = RunConfig::new(LatticeKind::Sc, Geometry::ScCurved, 6);
    cfg.eps1 = 13.0;
    cfg.nev = 4;
    cfg.tol = 1e-8;
    cfg.kpath.points = Some(points.clone());
    let forward = run_bandstructure(&cfg).unwrap();
    let mut reversed = points.clone();
    reversed.reverse();
    cfg.kpath.points = Some(reversed);
    cfg.seed = 99;
    let backward = run_bandstructure(&cfg).unwrap();
    for (i, rec) in forward.records.iter().enumerate() {
        let j = points.len() - 1 - i;
        assert_eq!(backward.records[j].k, rec.k);
        for (a, b) in forward.bands[i].iter().zip(&backward.bands[j]) {
            assert!((a * a - b * b).abs() <= 1e-9 * (a * a).max(1.0), "k {:?}: {a} vs {b}", rec.k);
        }
    }
}

#[test]
fn homogeneous_bands_do_not_depend_on_penalty() {
    let mut cfg = RunConfig::new(LatticeKind::Fcc, Geometry::Homogeneous, 6);
    cfg.l = 2.0 * PI;
    cfg.nev = 4;
    cfg.tol = 1e-8;
    cfg.kpath.samples_per_segment = Some(1);
    let auto = run_bandstructure(&cfg).unwrap();
    cfg.gamma = Some(200.0);
    let fixed = run_bandstructure(&cfg).unwrap();
    assert_eq!(fixed.total_escalations(), 0);
    for (a, b) in auto.bands.iter().zip(&fixed.bands) {
        assert!(a.windows(2).all(|p| p[0] <= p[1]));
        for (x, y) in a.iter().zip(b) {
            assert!((x * x - y * y).abs() <= 1e-7 * (x * x).max(1.0), "{a:?} vs {b:?}");
        }
    }
}

#[test]
fn m0_entries_stay_within_permittivity_bounds() {
    for (kind, geometry) in [(LatticeKind::Sc, Geometry::ScCurved), (LatticeKind::Bcc, Geometry::BccSingleGyroid), (LatticeKind::Fcc, Geometry::FccDiamond)] {
        let grid = GridSpec::new(12, 1).unwrap();
        let model = DielectricModel::new(geometry, 1.0, 13.0, 1.0).unwrap();
        let m0 = assemble_m0(&grid, &make_lattice(kind, 1.0).unwrap(), &model);
        assert!(m0.min() >= 1.0 / 13.0 - 1e-15 && m0.max() <= 1.0 + 1e-15);
        assert!(!m0.is_uniform(), "{geometry} should produce mixed cells at N=12");
    }
}
