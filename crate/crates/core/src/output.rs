//! Deterministic CSV and legacy-VTK writers.
//!
//! Floats are written with `{:.16e}` (17 significant digits), so identical
//! inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::field::{PressureField, VelocityField};
use crate::grid::{local_index, MacGrid};
use crate::verify::{StepDiagnostics, TranslateRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FieldFormat {
    #[default]
    Csv,
    Vtk,
}

impl FieldFormat {
    pub fn name(self) -> &'static str {
        match self {
            FieldFormat::Csv => "csv",
            FieldFormat::Vtk => "vtk",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(FieldFormat::Csv),
            "vtk" | "vtk-legacy" => Some(FieldFormat::Vtk),
            _ => None,
        }
    }
}

/// Writes `contents`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, contents)?;
    Ok(())
}

pub fn diagnostics_csv(steps: &[StepDiagnostics]) -> String {
    let mut s = String::from(StepDiagnostics::CSV_HEADER);
    s.push('\n');
    for d in steps {
        s.push_str(&d.csv_row());
        s.push('\n');
    }
    s
}

pub fn translate_csv(rows: &[TranslateRow]) -> String {
    let mut s = String::from("tau,l2,star0\n");
    for r in rows {
        let _ = writeln!(s, "{:.16e},{:.16e},{:.16e}", r.tau, r.l2, r.star0);
    }
    s
}

/// One row per unknown: `kind,index,x,y,z,value`, where `kind` is `p` for
/// cell pressures and `u0`, `u1`, `u2` for face velocities.
pub fn fields_csv(grid: &MacGrid, u: &VelocityField, p: &PressureField) -> String {
    let mut s = String::from("kind,index,x,y,z,value\n");
    for (k, v) in p.values.iter().enumerate() {
        let c = grid.cell_center(k);
        let _ = writeln!(s, "p,{k},{:.16e},{:.16e},{:.16e},{:.16e}", c[0], c[1], c[2], v);
    }
    for (f, v) in u.values.iter().enumerate() {
        let c = grid.face_center(f);
        let _ = writeln!(s, "u{},{f},{:.16e},{:.16e},{:.16e},{:.16e}", grid.face_direction(f), c[0], c[1], c[2], v);
    }
    s
}

/// Legacy VTK rectilinear grid with cell pressure and the cell-centered
/// average of the two face values per direction.
pub fn fields_vtk(grid: &MacGrid, u: &VelocityField, p: &PressureField, title: &str) -> String {
    let dim = grid.dim();
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0");
    let _ = writeln!(s, "{}", title.lines().next().unwrap_or(""));
    let _ = writeln!(s, "ASCII\nDATASET RECTILINEAR_GRID");
    // A 2D grid is written as a single layer of points in z.
    let points: Vec<&[f64]> = (0..3).map(|a| if a < dim { grid.nodes(a) } else { &[0.0][..] }).collect();
    let _ = writeln!(s, "DIMENSIONS {} {} {}", points[0].len(), points[1].len(), points[2].len());
    for (name, axis) in ["X", "Y", "Z"].iter().zip(&points) {
        let _ = writeln!(s, "{name}_COORDINATES {} double", axis.len());
        let vals: Vec<String> = axis.iter().map(|x| format!("{x:.16e}")).collect();
        let _ = writeln!(s, "{}", vals.join(" "));
    }
    let cells = grid.num_cells();
    let _ = writeln!(s, "CELL_DATA {cells}");
    let _ = writeln!(s, "SCALARS pressure double 1\nLOOKUP_TABLE default");
    for v in &p.values {
        let _ = writeln!(s, "{v:.16e}");
    }
    let _ = writeln!(s, "VECTORS velocity double");
    let sets = grid.face_sets();
    for k in 0..cells {
        let idx = grid.cell_position(k);
        let mut vel = [0.0; 3];
        for (a, va) in vel.iter_mut().enumerate().take(dim) {
            let local = |i: usize| {
                let mut j = idx;
                j[a] = i;
                local_index(sets[a].shape, j)
            };
            let lo = sets[a].offset + local(idx[a]);
            let hi = sets[a].offset + local(idx[a] + 1);
            *va = 0.5 * (u.values[lo] + u.values[hi]);
        }
        let _ = writeln!(s, "{:.16e} {:.16e} {:.16e}", vel[0], vel[1], vel[2]);
    }
    s
}

/// Writes a field snapshot to `path` in the chosen format.
pub fn emit_fields(grid: &MacGrid, u: &VelocityField, p: &PressureField, format: FieldFormat, path: &Path) -> Result<()> {
    let text = match format {
        FieldFormat::Csv => fields_csv(grid, u, p),
        FieldFormat::Vtk => fields_vtk(grid, u, p, "macproj fields"),
    };
    write_text(path, &text)
}
