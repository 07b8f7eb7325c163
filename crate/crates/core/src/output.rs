//! Run artifacts: energy and diagnostics CSV, binary snapshots with a JSON
//! sidecar, legacy VTK export and the run manifest.
//!
//! Floats are written with 17 significant digits (`{:.16e}`), which
//! round-trips every `f64` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{FaceVectorField, MacGrid, ScalarField};
use crate::ops;
use crate::stepper::{EnergyReport, SimState};

pub const ENERGY_COLUMNS: [&str; 17] = [
    "step",
    "time",
    "E_kin",
    "E_free",
    "E_tot",
    "visc_diss",
    "mob_diss",
    "inertia_defect",
    "transform_defect",
    "ineq_residual",
    "mass",
    "min_phi",
    "max_phi",
    "div_v_inf",
    "outer_iters",
    "newton_iters",
    "lin_iters",
];

pub const DIAGNOSTIC_COLUMNS: [&str; 6] = ["step", "time", "mean_mu", "integral_mu", "l2_psi0_prime", "l2_grad_phi"];

fn f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn format_energy_row(r: &EnergyReport) -> String {
    let floats = [
        r.time,
        r.e_kin,
        r.e_free,
        r.e_tot,
        r.visc_diss,
        r.mob_diss,
        r.inertia_defect,
        r.transform_defect,
        r.ineq_residual,
        r.mass,
        r.min_phi,
        r.max_phi,
        r.div_v_inf,
    ];
    let mut cols = vec![r.step.to_string()];
    cols.extend(floats.iter().map(|&x| f(x)));
    cols.extend([r.outer_iters, r.newton_iters, r.lin_iters].iter().map(|n| n.to_string()));
    cols.join(",")
}

pub fn format_diagnostics_row(r: &EnergyReport) -> String {
    let d = &r.diagnostics;
    format!(
        "{},{},{},{},{},{}",
        r.step,
        f(r.time),
        f(d.mean_mu),
        f(d.integral_mu),
        f(d.l2_psi0_prime),
        f(d.l2_grad_phi)
    )
}

/// Streams report rows to a CSV file with a fixed header.
pub struct CsvWriter {
    out: BufWriter<File>,
    row: fn(&EnergyReport) -> String,
}

impl CsvWriter {
    pub fn energy(path: &Path) -> Result<Self> {
        Self::create(path, &ENERGY_COLUMNS, format_energy_row)
    }

    pub fn diagnostics(path: &Path) -> Result<Self> {
        Self::create(path, &DIAGNOSTIC_COLUMNS, format_diagnostics_row)
    }

    fn create(path: &Path, header: &[&str], row: fn(&EnergyReport) -> String) -> Result<Self> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", header.join(","))?;
        Ok(CsvWriter { out, row })
    }

    pub fn write(&mut self, r: &EnergyReport) -> Result<()> {
        writeln!(self.out, "{}", (self.row)(r))?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_energy_csv(path: &Path, reports: &[EnergyReport]) -> Result<()> {
    let mut w = CsvWriter::energy(path)?;
    for r in reports {
        w.write(r)?;
    }
    w.flush()
}

/// Header and numeric rows of a CSV written by this module.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = BufReader::new(File::open(path)?).lines();
    let header = lines
        .next()
        .transpose()?
        .ok_or_else(|| Error::Parse { line: Some(1), key: None, message: "empty CSV".into() })?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        let row = line
            .split(',')
            .map(|c| {
                c.parse::<f64>().map_err(|e| Error::Parse { line: Some(k + 2), key: None, message: e.to_string() })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldEntry {
    pub name: String,
    /// `cell`, `xface` or `yface`.
    pub location: String,
    pub count: usize,
    /// Offset in bytes into the binary file.
    pub offset: usize,
}

/// Sidecar document describing a binary snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub hx: f64,
    pub hy: f64,
    pub time: f64,
    pub step: usize,
    pub byte_order: String,
    pub layout: String,
    pub fields: Vec<FieldEntry>,
}

/// Write `<stem>.bin` (little-endian f64: phi, mu, g, x-face velocity,
/// y-face velocity) and `<stem>.json`. Returns both paths.
pub fn write_snapshot(state: &SimState, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    let g = state.phi.grid;
    let fields: [(&str, &str, &[f64]); 5] = [
        ("phi", "cell", &state.phi.data),
        ("mu", "cell", &state.mu.data),
        ("g", "cell", &state.g.data),
        ("ux", "xface", &state.v.x),
        ("uy", "yface", &state.v.y),
    ];
    let bin = dir.join(format!("{stem}.bin"));
    let json = dir.join(format!("{stem}.json"));
    let mut out = BufWriter::new(File::create(&bin)?);
    let mut entries = Vec::new();
    let mut offset = 0;
    for (name, location, data) in fields {
        for x in data {
            out.write_all(&x.to_le_bytes())?;
        }
        entries.push(FieldEntry { name: name.into(), location: location.into(), count: data.len(), offset });
        offset += 8 * data.len();
    }
    out.flush()?;
    let meta = SnapshotMeta {
        nx: g.nx,
        ny: g.ny,
        lx: g.lx,
        ly: g.ly,
        hx: g.hx,
        hy: g.hy,
        time: state.t,
        step: state.step,
        byte_order: "little-endian f64".into(),
        layout: "row-major, x fastest; cell (i,j) at j*nx+i, x-face at j*(nx+1)+i, y-face at j*nx+i".into(),
        fields: entries,
    };
    std::fs::write(&json, serde_json::to_string_pretty(&meta).expect("sidecar serializes"))?;
    Ok((bin, json))
}

/// Read a snapshot back from its sidecar path.
pub fn read_snapshot(sidecar: &Path) -> Result<SimState> {
    let meta: SnapshotMeta = serde_json::from_str(&std::fs::read_to_string(sidecar)?)
        .map_err(|e| Error::Parse { line: Some(e.line()), key: None, message: e.to_string() })?;
    let mut bytes = Vec::new();
    File::open(sidecar.with_extension("bin"))?.read_to_end(&mut bytes)?;
    let grid = MacGrid::new(meta.nx, meta.ny, meta.lx, meta.ly)?;
    let field = |name: &str| -> Result<Vec<f64>> {
        let e = meta
            .fields
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::Parse { line: None, key: Some(name.into()), message: "field missing".into() })?;
        let end = e.offset + 8 * e.count;
        if end > bytes.len() {
            return Err(Error::ShapeMismatch(format!("field {name} runs past end of file")));
        }
        Ok(bytes[e.offset..end].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let v = FaceVectorField { grid, x: field("ux")?, y: field("uy")? };
    if v.x.len() != grid.n_xfaces() || v.y.len() != grid.n_yfaces() {
        return Err(Error::ShapeMismatch("velocity sizes do not match grid".into()));
    }
    Ok(SimState {
        t: meta.time,
        step: meta.step,
        v,
        phi: ScalarField::from_vec(grid, field("phi")?)?,
        mu: ScalarField::from_vec(grid, field("mu")?)?,
        g: ScalarField::from_vec(grid, field("g")?)?,
    })
}

/// Legacy ASCII VTK structured-points file with cell data `phi`, `mu`, `g`
/// and the cell-averaged velocity.
pub fn write_vtk(state: &SimState, path: &Path) -> Result<()> {
    let g = state.phi.grid;
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "twophase step {} t={}", state.step, f(state.t))?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET STRUCTURED_POINTS")?;
    writeln!(out, "DIMENSIONS {} {} 1", g.nx + 1, g.ny + 1)?;
    writeln!(out, "ORIGIN 0 0 0")?;
    writeln!(out, "SPACING {} {} 1", f(g.hx), f(g.hy))?;
    writeln!(out, "CELL_DATA {}", g.n_cells())?;
    for (name, field) in [("phi", &state.phi), ("mu", &state.mu), ("g", &state.g)] {
        writeln!(out, "SCALARS {name} double 1")?;
        writeln!(out, "LOOKUP_TABLE default")?;
        for x in &field.data {
            writeln!(out, "{}", f(*x))?;
        }
    }
    let (ux, uy) = ops::interp_face_to_center(&state.v);
    writeln!(out, "VECTORS velocity double")?;
    for k in 0..g.n_cells() {
        writeln!(out, "{} {} 0", f(ux.data[k]), f(uy.data[k]))?;
    }
    out.flush()?;
    Ok(())
}

/// Reproduction record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: String,
    pub energy_csv: String,
    pub diagnostics_csv: String,
    pub steps_requested: usize,
    pub steps_completed: usize,
    pub final_h: f64,
    pub retries: usize,
}

pub fn write_manifest(path: &Path, m: &Manifest) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(m).expect("manifest serializes"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ch::ChemPotDiagnostics;

    fn report(step: usize) -> EnergyReport {
        EnergyReport {
            step,
            time: 0.1 * step as f64,
            h: 0.1,
            e_kin: 1.0 / 3.0,
            e_free: -std::f64::consts::PI,
            e_tot: 1.0 / 3.0 - std::f64::consts::PI,
            visc_diss: 1e-17,
            mob_diss: 2.5e-3,
            inertia_defect: 0.0,
            transform_defect: 7.0e-9,
            ineq_residual: -1.234567890123e-15,
            mass: 0.1 + 0.2,
            min_phi: -0.99,
            max_phi: 0.98,
            div_v_inf: 3e-15,
            outer_iters: 3,
            newton_iters: 7,
            lin_iters: 11,
            diagnostics: ChemPotDiagnostics { mean_mu: 0.1, integral_mu: 2.0, l2_psi0_prime: 0.5, l2_grad_phi: 0.25 },
        }
    }

    fn state() -> SimState {
        let g = MacGrid::new(4, 5, 1.0, 1.25).unwrap();
        let mut v = FaceVectorField::from_fns(g, |x, y| x * y + 1.0 / 7.0, |x, y| x - y);
        v.zero_boundary();
        SimState {
            t: 0.3,
            step: 3,
            v,
            phi: ScalarField::from_fn(g, |x, y| (x - y).sin() / 3.0),
            mu: ScalarField::from_fn(g, |x, _| x.exp()),
            g: ScalarField::from_fn(g, |_, y| y / 11.0),
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("energy.csv");
        let reports = [report(0), report(1)];
        write_energy_csv(&path, &reports).unwrap();
        let (header, rows) = read_csv(&path).unwrap();
        assert_eq!(header, ENERGY_COLUMNS);
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.len() == 17));
        let r = &reports[1];
        assert_eq!(rows[1][2], r.e_kin);
        assert_eq!(rows[1][3], r.e_free);
        assert_eq!(rows[1][9], r.ineq_residual);
        assert_eq!(rows[1][10], r.mass);
        assert_eq!(rows[1][16], 11.0);
    }

    #[test]
    fn header_only_for_empty_stream() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.csv");
        write_energy_csv(&path, &[]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert_eq!(text.trim_end().split(',').count(), 17);
    }

    #[test]
    fn snapshot_round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let s = state();
        let (bin, json) = write_snapshot(&s, dir.path(), "snap_000003").unwrap();
        assert_eq!(std::fs::metadata(&bin).unwrap().len() as usize, 8 * (3 * 20 + 25 + 24));
        let back = read_snapshot(&json).unwrap();
        assert_eq!(back, s);
        let meta: SnapshotMeta = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
        assert_eq!((meta.nx, meta.ny), (4, 5));
        assert_eq!(meta.fields.len(), 5);
    }

    #[test]
    fn vtk_has_expected_sections() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.vtk");
        write_vtk(&state(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0"));
        assert!(text.contains("DIMENSIONS 5 6 1"));
        assert!(text.contains("CELL_DATA 20"));
        assert_eq!(text.matches("SCALARS").count(), 3);
        assert!(text.contains("VECTORS velocity double"));
    }
}
