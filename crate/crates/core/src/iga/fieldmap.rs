//! Regular (z, r) sampling of the vacuum field.
//!
//! Text layout: one header line `# nz nr z0 z1 r0 r1` carrying the grid, then
//! `nz * nr` rows `z r Ez Er` (SI units), z-major. Masked points are written as zero
//! fields and flagged `0` in the `<file>.mask` sidecar. E_z is the physical
//! component, so an electrode below the anode at negative potential gives E_z < 0.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solution::FieldSolution;
use super::IgaError;
use crate::geometry::Material;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldmapGrid {
    pub nz: usize,
    pub nr: usize,
    pub z0: f64,
    pub z1: f64,
    pub r0: f64,
    pub r1: f64,
}

impl Default for FieldmapGrid {
    fn default() -> Self {
        FieldmapGrid {
            nz: 256,
            nr: 16,
            z0: 0.0,
            z1: 0.13,
            r0: 0.0,
            r1: 0.005,
        }
    }
}

impl FieldmapGrid {
    pub fn check(&self) -> Result<(), IgaError> {
        if self.nz < 2 || self.nr < 2 {
            return Err(IgaError::InvalidGrid("need at least two nodes per direction".into()));
        }
        if !(self.z1 > self.z0 && self.r1 > self.r0 && self.r0 >= 0.0) {
            return Err(IgaError::InvalidGrid("need z0 < z1 and 0 ≤ r0 < r1".into()));
        }
        if ![self.z0, self.z1, self.r0, self.r1].iter().all(|v| v.is_finite()) {
            return Err(IgaError::InvalidGrid("bounds must be finite".into()));
        }
        Ok(())
    }

    pub fn z(&self, i: usize) -> f64 {
        self.z0 + (self.z1 - self.z0) * i as f64 / (self.nz - 1) as f64
    }

    pub fn r(&self, j: usize) -> f64 {
        self.r0 + (self.r1 - self.r0) * j as f64 / (self.nr - 1) as f64
    }

    pub fn dz(&self) -> f64 {
        (self.z1 - self.z0) / (self.nz - 1) as f64
    }

    pub fn dr(&self) -> f64 {
        (self.r1 - self.r0) / (self.nr - 1) as f64
    }

    /// Same box with every interval halved.
    pub fn refined(&self) -> FieldmapGrid {
        FieldmapGrid {
            nz: 2 * (self.nz - 1) + 1,
            nr: 2 * (self.nr - 1) + 1,
            ..*self
        }
    }
}

/// Provenance written next to a fieldmap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldmapMeta {
    pub grid: FieldmapGrid,
    pub config_hash: String,
    pub seed: u64,
    pub masked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fieldmap {
    pub grid: FieldmapGrid,
    /// indexed `iz * nr + ir`
    pub ez: Vec<f64>,
    pub er: Vec<f64>,
    pub mask: Vec<bool>,
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, IgaError> {
    tok.and_then(|t| t.parse().ok()).ok_or_else(|| IgaError::Parse {
        line,
        msg: format!("expected {what}"),
    })
}

impl Fieldmap {
    pub fn index(&self, iz: usize, ir: usize) -> usize {
        iz * self.grid.nr + ir
    }

    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| !**m).count()
    }

    pub fn to_text(&self) -> String {
        let g = &self.grid;
        let mut s = format!("# {} {} {:e} {:e} {:e} {:e}\n", g.nz, g.nr, g.z0, g.z1, g.r0, g.r1);
        for iz in 0..g.nz {
            for ir in 0..g.nr {
                let k = self.index(iz, ir);
                let _ = writeln!(s, "{:e} {:e} {:e} {:e}", g.z(iz), g.r(ir), self.ez[k], self.er[k]);
            }
        }
        s
    }

    /// Writes the map, its mask, and (when given) a `.meta.json` sidecar.
    pub fn write(&self, path: &Path, meta: Option<&FieldmapMeta>) -> Result<(), IgaError> {
        fs::write(path, self.to_text())?;
        let mask: String = self.mask.iter().map(|&m| if m { "1\n" } else { "0\n" }).collect();
        fs::write(sidecar(path, ".mask"), mask)?;
        if let Some(m) = meta {
            fs::write(sidecar(path, ".meta.json"), serde_json::to_string_pretty(m)?)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str, mask_text: Option<&str>) -> Result<Fieldmap, IgaError> {
        let mut lines = text.lines().enumerate();
        let (_, head) = lines.next().ok_or(IgaError::Parse {
            line: 1,
            msg: "empty file".into(),
        })?;
        let mut t = head.strip_prefix('#').unwrap_or("").split_whitespace();
        let grid = FieldmapGrid {
            nz: parse(t.next(), 1, "nz")?,
            nr: parse(t.next(), 1, "nr")?,
            z0: parse(t.next(), 1, "z0")?,
            z1: parse(t.next(), 1, "z1")?,
            r0: parse(t.next(), 1, "r0")?,
            r1: parse(t.next(), 1, "r1")?,
        };
        grid.check()?;
        let n = grid.nz * grid.nr;
        let (mut ez, mut er) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for (k, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut t = line.split_whitespace();
            let _z: f64 = parse(t.next(), k + 1, "z")?;
            let _r: f64 = parse(t.next(), k + 1, "r")?;
            ez.push(parse(t.next(), k + 1, "Ez")?);
            er.push(parse(t.next(), k + 1, "Er")?);
        }
        if ez.len() != n {
            return Err(IgaError::Parse {
                line: ez.len() + 1,
                msg: format!("expected {n} rows, found {}", ez.len()),
            });
        }
        let mask = match mask_text {
            Some(m) => {
                let v: Vec<bool> = m.lines().filter(|l| !l.trim().is_empty()).map(|l| l.trim() == "1").collect();
                if v.len() != n {
                    return Err(IgaError::Parse {
                        line: v.len() + 1,
                        msg: format!("mask has {} rows, expected {n}", v.len()),
                    });
                }
                v
            }
            None => vec![true; n],
        };
        Ok(Fieldmap { grid, ez, er, mask })
    }

    /// Reads a map; a missing mask sidecar means every node is valid.
    pub fn read(path: &Path) -> Result<Fieldmap, IgaError> {
        let text = fs::read_to_string(path)?;
        let mp = sidecar(path, ".mask");
        let mask = if mp.exists() { Some(fs::read_to_string(mp)?) } else { None };
        Fieldmap::from_text(&text, mask.as_deref())
    }
}

/// Samples the field on the grid; nodes outside every vacuum patch are masked.
pub fn export_fieldmap(sol: &FieldSolution, grid: &FieldmapGrid) -> Result<Fieldmap, IgaError> {
    grid.check()?;
    let model = sol.model();
    let boxes: Vec<[f64; 4]> = model
        .patches
        .iter()
        .map(|p| {
            let mut b = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
            for q in p.surface.points() {
                b = [b[0].min(q[0]), b[1].max(q[0]), b[2].min(q[1]), b[3].max(q[1])];
            }
            b
        })
        .collect();
    let all = boxes.iter().fold([f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY], |a, b| {
        [a[0].min(b[0]), a[1].max(b[1]), a[2].min(b[2]), a[3].max(b[3])]
    });
    let tol = 1e-12 * model.length_scale();
    if grid.r0 < all[0] - tol || grid.r1 > all[1] + tol || grid.z0 < all[2] - tol || grid.z1 > all[3] + tol {
        return Err(IgaError::InvalidGrid(format!(
            "grid [{}, {}] x [{}, {}] leaves the model box [{}, {}] x [{}, {}]",
            grid.z0, grid.z1, grid.r0, grid.r1, all[2], all[3], all[0], all[1]
        )));
    }
    let rows: Vec<Vec<(f64, f64, bool)>> = (0..grid.nz)
        .into_par_iter()
        .map(|iz| {
            (0..grid.nr)
                .map(|ir| {
                    let x = [grid.r(ir), grid.z(iz)];
                    let hit = (0..model.patches.len())
                        .filter(|&k| model.patches[k].material == Material::Vacuum)
                        .filter(|&k| {
                            let b = boxes[k];
                            x[0] >= b[0] - tol && x[0] <= b[1] + tol && x[1] >= b[2] - tol && x[1] <= b[3] + tol
                        })
                        .find_map(|k| model.invert_point(k, x).map(|(u, v)| (k, u, v)));
                    match hit.and_then(|(k, u, v)| sol.eval_field(k, u, v).ok()) {
                        Some(e) => {
                            let er = if x[0] == 0.0 { 0.0 } else { e[0] };
                            (e[1], er, true)
                        }
                        None => (0.0, 0.0, false),
                    }
                })
                .collect()
        })
        .collect();
    let flat: Vec<(f64, f64, bool)> = rows.into_iter().flatten().collect();
    Ok(Fieldmap {
        grid: *grid,
        ez: flat.iter().map(|v| v.0).collect(),
        er: flat.iter().map(|v| v.1).collect(),
        mask: flat.iter().map(|v| v.2).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::parallel_plate;
    use crate::iga::{solve_model, Discretization, LinearSolver, Voltages};
    use std::sync::Arc;

    fn plate() -> FieldSolution {
        let v = Voltages {
            d0: 0.0,
            d1: -300e3,
            d2: 0.0,
        };
        solve_model(Arc::new(parallel_plate(0.05, 0.08).unwrap()), Discretization::default(), v, LinearSolver::Direct).unwrap()
    }

    fn small_grid() -> FieldmapGrid {
        FieldmapGrid {
            nz: 9,
            nr: 4,
            z0: 0.0,
            z1: 0.08,
            r0: 0.0,
            r1: 0.01,
        }
    }

    #[test]
    fn plate_map_is_uniform() {
        let fm = export_fieldmap(&plate(), &small_grid()).unwrap();
        assert_eq!(fm.masked_count(), 0);
        let e0 = 300e3 / 0.08;
        for k in 0..fm.ez.len() {
            assert!((fm.ez[k] + e0).abs() <= 1e-8 * e0);
            assert!(fm.er[k].abs() <= 1e-8 * e0);
        }
    }

    #[test]
    fn write_read_round_trip_is_exact() {
        let mut fm = export_fieldmap(&plate(), &small_grid()).unwrap();
        fm.mask[3] = false;
        fm.ez[3] = 0.0;
        fm.er[3] = 0.0;
        fm.ez[5] = 0.1 + 0.2;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("map.txt");
        let meta = FieldmapMeta {
            grid: fm.grid,
            config_hash: "abc".into(),
            seed: 7,
            masked: fm.masked_count(),
        };
        fm.write(&p, Some(&meta)).unwrap();
        let back = Fieldmap::read(&p).unwrap();
        assert_eq!(back, fm);
        assert!(back.ez.iter().zip(&fm.ez).all(|(a, b)| a.to_bits() == b.to_bits()));
        let m: FieldmapMeta = serde_json::from_str(&fs::read_to_string(sidecar(&p, ".meta.json")).unwrap()).unwrap();
        assert_eq!(m, meta);
        assert!(fs::read_to_string(&p).unwrap().starts_with("# 9 4 "));
    }

    #[test]
    fn refined_grid_keeps_coarse_nodes() {
        let sol = plate();
        let g = small_grid();
        let a = export_fieldmap(&sol, &g).unwrap();
        let b = export_fieldmap(&sol, &g.refined()).unwrap();
        assert_eq!(b.grid.nz, 17);
        let scale = 300e3 / 0.08;
        for iz in 0..g.nz {
            for ir in 0..g.nr {
                let (ka, kb) = (a.index(iz, ir), b.index(2 * iz, 2 * ir));
                assert!((a.ez[ka] - b.ez[kb]).abs() <= 1e-10 * scale);
                assert!((a.er[ka] - b.er[kb]).abs() <= 1e-10 * scale);
            }
        }
    }

    #[test]
    fn outside_points_are_masked_and_bad_grids_rejected() {
        let sol = plate();
        let mut g = small_grid();
        g.z1 = 0.2;
        assert!(matches!(export_fieldmap(&sol, &g), Err(IgaError::InvalidGrid(_))));
        g.nz = 1;
        assert!(export_fieldmap(&sol, &g).is_err());
        assert!(Fieldmap::from_text("# 2 2 0 1 0 1\n0 0 1 1\n", None).is_err());
    }
}
