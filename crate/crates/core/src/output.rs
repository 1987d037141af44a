//! CSV, SVG and JSON emitters for band structures.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::bands::{BandStructure, Gap, KPointRecord, RunConfig};
use crate::compensation::EigResult;
use crate::error::{Error, Result};
use crate::grid::write_field_dump;

/// `label,kx,ky,kz,abscissa,band1..bandM,band1_norm..bandM_norm`.
pub fn csv_string(bs: &BandStructure) -> String {
    let nev = bs.nev();
    let mut s = String::from("label,kx,ky,kz,abscissa");
    for b in 1..=nev {
        write!(s, ",band{b}").unwrap();
    }
    for b in 1..=nev {
        write!(s, ",band{b}_norm").unwrap();
    }
    s.push('\n');
    for (rec, omegas) in bs.records.iter().zip(&bs.bands) {
        // `{}` prints the shortest representation that parses back to the same f64.
        write!(s, "{},{},{},{},{}", rec.label.as_deref().unwrap_or(""), rec.k[0], rec.k[1], rec.k[2], rec.abscissa).unwrap();
        for w in omegas {
            write!(s, ",{w}").unwrap();
        }
        for w in omegas {
            write!(s, ",{}", bs.normalized(*w)).unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn write_csv(bs: &BandStructure, path: &Path) -> Result<()> {
    std::fs::write(path, csv_string(bs))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvRow {
    pub label: Option<String>,
    pub k: [f64; 3],
    pub abscissa: f64,
    pub bands: Vec<f64>,
    pub normalized: Vec<f64>,
}

/// Parses the output of [`csv_string`].
pub fn read_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Config("empty CSV".into()))?;
    let cols = header.split(',').count();
    if cols < 5 || (cols - 5) % 2 != 0 {
        return Err(Error::Config(format!("unexpected CSV header '{header}'")));
    }
    let nev = (cols - 5) / 2;
    let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Config(format!("bad number '{s}': {e}")));
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols {
            return Err(Error::Config(format!("row has {} fields, expected {cols}", f.len())));
        }
        let vals = f[1..].iter().map(|s| num(s)).collect::<Result<Vec<f64>>>()?;
        rows.push(CsvRow {
            label: (!f[0].is_empty()).then(|| f[0].to_string()),
            k: [vals[0], vals[1], vals[2]],
            abscissa: vals[3],
            bands: vals[4..4 + nev].to_vec(),
            normalized: vals[4 + nev..].to_vec(),
        });
    }
    Ok(rows)
}

/// Static band diagram in normalized frequency, with vertex labels and the gap shaded.
pub fn svg_string(bs: &BandStructure, title: &str) -> String {
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (60.0, 20.0, 40.0, 40.0);
    let xmax = bs.records.last().map_or(1.0, |r| r.abscissa).max(1e-12);
    let ymax = bs.bands.iter().flatten().map(|&v| bs.normalized(v)).fold(0.0, f64::max).max(1e-12) * 1.05;
    let px = |s: f64| left + (w - left - right) * s / xmax;
    let py = |v: f64| h - bottom - (h - top - bottom) * v / ymax;
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#).unwrap();
    writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#, w / 2.0, escape(title)).unwrap();
    if let Some(Gap { omega_low, omega_up, ratio, .. }) = bs.gap {
        if ratio > 0.0 {
            let (y0, y1) = (py(bs.normalized(omega_up)), py(bs.normalized(omega_low)));
            writeln!(
                s,
                r##"<rect class="gap" x="{}" y="{y0:.2}" width="{}" height="{:.2}" fill="#f4d03f" fill-opacity="0.4"/>"##,
                left,
                w - left - right,
                y1 - y0
            )
            .unwrap();
        }
    }
    for rec in &bs.records {
        if let Some(label) = &rec.label {
            let x = px(rec.abscissa);
            writeln!(s, r##"<line x1="{x:.2}" y1="{top}" x2="{x:.2}" y2="{}" stroke="#999" stroke-width="0.5"/>"##, h - bottom).unwrap();
            writeln!(s, r#"<text x="{x:.2}" y="{}" font-family="sans-serif" font-size="13" text-anchor="middle">{}</text>"#, h - bottom + 18.0, escape(label)).unwrap();
        }
    }
    for b in 0..bs.nev() {
        let pts: Vec<String> = bs
            .records
            .iter()
            .zip(&bs.bands)
            .map(|(r, om)| format!("{:.2},{:.2}", px(r.abscissa), py(bs.normalized(om[b]))))
            .collect();
        writeln!(s, r##"<polyline fill="none" stroke="#1f4e99" stroke-width="1.5" points="{}"/>"##, pts.join(" ")).unwrap();
    }
    writeln!(s, r##"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"##, w - left - right, h - top - bottom).unwrap();
    for i in 0..=4 {
        let v = ymax * i as f64 / 4.0;
        writeln!(s, r#"<text x="{}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{v:.3}</text>"#, left - 6.0, py(v) + 4.0).unwrap();
    }
    writeln!(s, r#"<text x="16" y="{}" font-family="sans-serif" font-size="13" transform="rotate(-90 16 {})" text-anchor="middle">ωl/2π</text>"#, h / 2.0, h / 2.0).unwrap();
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write_svg(bs: &BandStructure, title: &str, path: &Path) -> Result<()> {
    std::fs::write(path, svg_string(bs, title))?;
    Ok(())
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub version: &'static str,
    pub config: &'a RunConfig,
    pub gap: Option<Gap>,
    pub total_escalations: usize,
    pub total_iterations: usize,
    pub seconds: f64,
    pub kpoints: &'a [KPointRecord],
}

pub fn write_manifest(bs: &BandStructure, cfg: &RunConfig, seconds: f64, path: &Path) -> Result<()> {
    let m = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
        gap: bs.gap,
        total_escalations: bs.total_escalations(),
        total_iterations: bs.records.iter().map(|r| r.iterations).sum(),
        seconds,
        kpoints: &bs.records,
    };
    let f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(f, &m)?;
    Ok(())
}

/// Writes `k{index:04}_band{b:02}.mfd` for every eigenvector of one k-point.
pub fn dump_eigenvectors(dir: &Path, index: usize, eig: &EigResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for (b, v) in eig.vectors.iter().enumerate() {
        let path = dir.join(format!("k{index:04}_band{:02}.mfd", b + 1));
        let mut w = BufWriter::new(File::create(path)?);
        write_field_dump(&mut w, v.n, v.space, &v.values)?;
        w.flush()?;
    }
    Ok(())
}

/// Writes every output named in the configuration.
pub fn emit_outputs(bs: &BandStructure, cfg: &RunConfig, seconds: f64) -> Result<()> {
    if let Some(p) = &cfg.output.csv {
        write_csv(bs, p)?;
    }
    if let Some(p) = &cfg.output.svg {
        let title = format!("{} {} N={} (ε₁/ε₀ = {})", cfg.lattice, cfg.geometry, cfg.n, cfg.eps1 / cfg.eps0);
        write_svg(bs, &title, p)?;
    }
    if let Some(p) = &cfg.output.manifest {
        write_manifest(bs, cfg, seconds, p)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dielectric::Geometry;
    use crate::lattice::LatticeKind;

    fn record(i: usize, label: Option<&str>, lambdas: Vec<f64>) -> KPointRecord {
        KPointRecord {
            index: i,
            label: label.map(str::to_string),
            k: [0.1 * i as f64, 1.0 / 3.0, 0.0],
            abscissa: i as f64 * 0.7,
            lambdas_re: lambdas.clone(),
            residuals: vec![1e-6; lambdas.len()],
            lambdas,
            iterations: 5,
            gamma: 20.0,
            shift: 0.0,
            escalations: 0,
            seconds: 0.1,
        }
    }

    fn sample() -> BandStructure {
        BandStructure::from_records(2.0, vec![record(0, Some("Γ"), vec![0.3, 2.0]), record(1, Some("X"), vec![0.5, 2.2])], None)
    }

    #[test]
    fn csv_shape_and_roundtrip() {
        let bs = sample();
        let text = csv_string(&bs);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "label,kx,ky,kz,abscissa,band1,band2,band1_norm,band2_norm");
        assert!(lines.iter().all(|l| l.split(',').count() == 5 + 2 * 2));
        let rows = read_csv(&text).unwrap();
        for (row, (rec, om)) in rows.iter().zip(bs.records.iter().zip(&bs.bands)) {
            assert_eq!(&row.bands, om);
            assert_eq!(row.k, rec.k);
            assert_eq!(row.abscissa, rec.abscissa);
            assert_eq!(row.label, rec.label);
        }
        assert!((rows[0].normalized[0] - 0.3f64.sqrt() * 2.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
    }

    #[test]
    fn svg_shades_gap_once() {
        let bs = sample();
        assert!(bs.gap.is_some());
        let svg = svg_string(&bs, "t");
        assert_eq!(svg.matches(r#"class="gap""#).count(), 1);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains(">Γ<") && svg.contains(">X<"));
        let no_gap = BandStructure::from_records(1.0, vec![record(0, None, vec![1.0, 4.0]), record(1, None, vec![4.0, 9.0])], None);
        assert!(!svg_string(&no_gap, "t").contains(r#"class="gap""#));
    }

    #[test]
    fn manifest_and_dumps_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::new(LatticeKind::Sc, Geometry::Homogeneous, 8);
        cfg.output.csv = Some(dir.path().join("b.csv"));
        cfg.output.svg = Some(dir.path().join("b.svg"));
        cfg.output.manifest = Some(dir.path().join("m.json"));
        let bs = sample();
        emit_outputs(&bs, &cfg, 1.5).unwrap();
        let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("m.json")).unwrap()).unwrap();
        assert_eq!(m["total_escalations"], 0);
        assert_eq!(m["kpoints"].as_array().unwrap().len(), 2);
        assert_eq!(m["config"]["N"], 8);
        assert!(dir.path().join("b.svg").exists());
        let eig = EigResult {
            lambdas: vec![1.0],
            vectors: vec![crate::grid::VectorField::zeros(2, crate::grid::Space::Face)],
            ..EigResult::default()
        };
        dump_eigenvectors(&dir.path().join("vec"), 3, &eig).unwrap();
        let f = std::fs::File::open(dir.path().join("vec/k0003_band01.mfd")).unwrap();
        let (n, space, vals) = crate::grid::read_field_dump(f).unwrap();
        assert_eq!((n, space, vals.len()), (2, crate::grid::Space::Face, 24));
        let bad = Path::new("/nonexistent/dir/x.csv");
        assert!(write_csv(&bs, bad).is_err());
    }
}
