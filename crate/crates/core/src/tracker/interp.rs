use crate::iga::Fieldmap;

/// Cubic Catmull-Rom weights on four equally spaced nodes, evaluated at `t`
/// measured from the second node.
fn catmull_rom(p: [f64; 4], t: f64) -> f64 {
    let [a, b, c, d] = p;
    0.5 * (2.0 * b + (c - a) * t + (2.0 * a - 5.0 * b + 4.0 * c - d) * t * t + (3.0 * b - a - 3.0 * c + d) * t * t * t)
}

fn cubic2(p: [[f64; 2]; 4], t: f64) -> [f64; 2] {
    [
        catmull_rom([p[0][0], p[1][0], p[2][0], p[3][0]], t),
        catmull_rom([p[0][1], p[1][1], p[2][1], p[3][1]], t),
    ]
}

fn ghost(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [2.0 * a[0] - b[0], 2.0 * a[1] - b[1]]
}

/// Bicubic (Catmull-Rom) interpolation of `(E_z, E_ρ)` on a fieldmap, with the
/// radial mirror `E_z` even and `E_ρ` odd at the axis and linear ghost nodes at the
/// other edges and next to masked nodes. Points whose cell touches a masked node,
/// or that leave the grid, give `None`. Along z the end cells are extended by at
/// most one cell so a step can finish across the last plane.
pub struct FieldInterpolator<'a> {
    map: &'a Fieldmap,
    mirror: bool,
}

impl<'a> FieldInterpolator<'a> {
    pub fn new(map: &'a Fieldmap) -> Self {
        FieldInterpolator {
            map,
            mirror: map.grid.r0 == 0.0,
        }
    }

    pub fn map(&self) -> &Fieldmap {
        self.map
    }

    fn node(&self, iz: isize, ir: isize) -> Option<[f64; 2]> {
        let g = &self.map.grid;
        if iz < 0 || iz >= g.nz as isize || ir >= g.nr as isize {
            return None;
        }
        if ir < 0 {
            return if ir == -1 && self.mirror {
                self.node(iz, 1).map(|v| [v[0], -v[1]])
            } else {
                None
            };
        }
        let k = self.map.index(iz as usize, ir as usize);
        self.map.mask[k].then(|| [self.map.ez[k], self.map.er[k]])
    }

    fn row(&self, iz: isize, ir: isize, t: f64) -> Option<[f64; 2]> {
        let v0 = self.node(iz, ir)?;
        let v1 = self.node(iz, ir + 1)?;
        let vm = self.node(iz, ir - 1).unwrap_or_else(|| ghost(v0, v1));
        let vp = self.node(iz, ir + 2).unwrap_or_else(|| ghost(v1, v0));
        Some(cubic2([vm, v0, v1, vp], t))
    }

    /// `(E_z, E_ρ)` at `(z, ρ)`.
    pub fn field_rz(&self, z: f64, rho: f64) -> Option<[f64; 2]> {
        let g = &self.map.grid;
        let fz = (z - g.z0) / g.dz();
        let fr = (rho - g.r0) / g.dr();
        let (nz, nr) = ((g.nz - 1) as f64, (g.nr - 1) as f64);
        if !(fz >= -1.0 && fz <= nz + 1.0 && fr >= 0.0 && fr <= nr) {
            return None;
        }
        let iz = fz.floor().clamp(0.0, nz - 1.0);
        let ir = fr.floor().min(nr - 1.0);
        let (tz, tr) = (fz - iz, fr - ir);
        let (iz, ir) = (iz as isize, ir as isize);
        let r0 = self.row(iz, ir, tr)?;
        let r1 = self.row(iz + 1, ir, tr)?;
        let rm = self.row(iz - 1, ir, tr).unwrap_or_else(|| ghost(r0, r1));
        let rp = self.row(iz + 2, ir, tr).unwrap_or_else(|| ghost(r1, r0));
        Some(cubic2([rm, r0, r1, rp], tz))
    }

    /// Cartesian `(E_x, E_y, E_z)`; exactly zero transverse field on the axis.
    pub fn field_at(&self, x: f64, y: f64, z: f64) -> Option<[f64; 3]> {
        let rho = x.hypot(y);
        let [ez, er] = self.field_rz(z, rho)?;
        if rho == 0.0 {
            return Some([0.0, 0.0, ez]);
        }
        Some([er * x / rho, er * y / rho, ez])
    }
}
