use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solution::FieldSolution;
use super::space::{Discretization, SplineSpace};
use super::sparse::{conjugate_gradient, norm, CsrMatrix, SkylineCholesky};
use super::IgaError;
use crate::geometry::{BoundaryTag, MultiPatchModel};

/// Prescribed potential per Dirichlet tag, in volts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Voltages {
    pub d0: f64,
    pub d1: f64,
    pub d2: f64,
}

impl Default for Voltages {
    fn default() -> Self {
        Voltages {
            d0: 0.0,
            d1: -300e3,
            d2: 1e3,
        }
    }
}

impl Voltages {
    pub fn of(&self, tag: BoundaryTag) -> f64 {
        match tag {
            BoundaryTag::GammaD0 => self.d0,
            BoundaryTag::GammaD1 => self.d1,
            BoundaryTag::GammaD2 => self.d2,
            BoundaryTag::Axis | BoundaryTag::Natural => 0.0,
        }
    }

    pub fn scaled(&self, c: f64) -> Voltages {
        Voltages {
            d0: c * self.d0,
            d1: c * self.d1,
            d2: c * self.d2,
        }
    }

    pub fn min(&self) -> f64 {
        self.d0.min(self.d1).min(self.d2)
    }

    pub fn max(&self) -> f64 {
        self.d0.max(self.d1).max(self.d2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinearSolver {
    Direct,
    Cg { tol: f64, max_iter: usize },
}

impl Default for LinearSolver {
    fn default() -> Self {
        LinearSolver::Direct
    }
}

/// Reduced system `K_ff φ_f + ϱ = 0` with `ϱ = K_fd φ_d`.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    /// stiffness over all global functions, before elimination
    pub stiffness: CsrMatrix,
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// prescribed coefficients (zero at free functions)
    pub dirichlet_values: Vec<f64>,
}

type Triplets = Vec<(usize, usize, f64)>;

fn element_triplets(space: &SplineSpace, model: &MultiPatchModel, patch: usize, ex: usize, ey: usize) -> Result<Triplets, IgaError> {
    let ps = &space.patches[patch];
    let surf = &model.patches[patch].surface;
    let eps = model.permittivity(patch);
    let p = space.disc.degree;
    let nl = (p + 1) * (p + 1);
    let dofs = space.element_functions(patch, ex, ey);
    let mut k = vec![0.0; nl * nl];
    let mut grad = vec![[0.0; 2]; nl];
    let (tx, ty) = (&ps.xi, &ps.eta);
    for qy in 0..ty.points[ey].len() {
        for qx in 0..tx.points[ex].len() {
            let (u, v) = (tx.points[ex][qx], ty.points[ey][qy]);
            let sp = surf.eval_jacobian(u, v)?;
            let det = sp.det();
            if !(det > 0.0) {
                return Err(IgaError::SingularJacobian { patch, xi: u, eta: v, det });
            }
            let j = sp.jac;
            let scale = eps * sp.point[0] * det * tx.weights[ex][qx] * ty.weights[ey][qy];
            let (nx, dx) = (&tx.values[ex][qx], &tx.derivs[ex][qx]);
            let (ny, dy) = (&ty.values[ey][qy], &ty.derivs[ey][qy]);
            for ly in 0..=p {
                for lx in 0..=p {
                    let gu = dx[lx] * ny[ly];
                    let gv = nx[lx] * dy[ly];
                    grad[lx + (p + 1) * ly] = [(j[1][1] * gu - j[1][0] * gv) / det, (-j[0][1] * gu + j[0][0] * gv) / det];
                }
            }
            for a in 0..nl {
                for b in 0..nl {
                    k[a * nl + b] += scale * (grad[a][0] * grad[b][0] + grad[a][1] * grad[b][1]);
                }
            }
        }
    }
    let mut t = Vec::with_capacity(nl * nl);
    for a in 0..nl {
        for b in 0..nl {
            t.push((dofs[a], dofs[b], k[a * nl + b]));
        }
    }
    Ok(t)
}

/// Full ρ-weighted stiffness matrix over all global functions.
pub fn assemble_stiffness(space: &SplineSpace, model: &MultiPatchModel) -> Result<CsrMatrix, IgaError> {
    let n = space.disc.n_sub;
    let elements: Vec<(usize, usize, usize)> = (0..space.patches.len())
        .flat_map(|k| (0..n).flat_map(move |ey| (0..n).map(move |ex| (k, ex, ey))))
        .collect();
    let parts: Vec<Result<Triplets, IgaError>> = elements
        .par_iter()
        .map(|&(k, ex, ey)| element_triplets(space, model, k, ex, ey))
        .collect();
    let mut all = Vec::new();
    for part in parts {
        all.extend(part?);
    }
    Ok(CsrMatrix::from_triplets(space.n_global, space.n_global, all))
}

/// Assembles the stiffness matrix and eliminates the Dirichlet functions.
pub fn assemble(space: &SplineSpace, model: &MultiPatchModel, voltages: &Voltages) -> Result<LinearSystem, IgaError> {
    let stiffness = assemble_stiffness(space, model)?;
    let dirichlet_values: Vec<f64> = space.dirichlet.iter().map(|t| t.map_or(0.0, |t| voltages.of(t))).collect();
    let matrix = stiffness.select(&space.free_index, &space.free_index, space.n_free, space.n_free);
    let mut rhs = vec![0.0; space.n_free];
    for g in 0..space.n_global {
        if let Some(f) = space.free_index[g] {
            rhs[f] = stiffness
                .row(g)
                .filter(|&(c, _)| space.free_index[c].is_none())
                .map(|(c, v)| v * dirichlet_values[c])
                .sum();
        }
    }
    Ok(LinearSystem {
        stiffness,
        matrix,
        rhs,
        dirichlet_values,
    })
}

fn residual(a: &CsrMatrix, x: &[f64], rhs: &[f64]) -> Vec<f64> {
    a.mul_vec(x).iter().zip(rhs).map(|(ax, r)| ax + r).collect()
}

/// Solves the reduced system and returns the full coefficient vector.
pub fn solve(space: &SplineSpace, sys: &LinearSystem, solver: LinearSolver) -> Result<Vec<f64>, IgaError> {
    let rn = norm(&sys.rhs);
    let tol = 1e-10 * rn;
    let neg: Vec<f64> = sys.rhs.iter().map(|v| -v).collect();
    let x = if rn == 0.0 {
        vec![0.0; space.n_free]
    } else {
        match solver {
            LinearSolver::Direct => {
                let chol = SkylineCholesky::factor(&sys.matrix)?;
                let mut x = chol.solve(&neg);
                for _ in 0..3 {
                    let r = residual(&sys.matrix, &x, &sys.rhs);
                    if norm(&r) <= tol {
                        break;
                    }
                    let neg_r: Vec<f64> = r.iter().map(|v| -v).collect();
                    let dx = chol.solve(&neg_r);
                    for (xi, d) in x.iter_mut().zip(dx) {
                        *xi += d;
                    }
                }
                x
            }
            LinearSolver::Cg { tol: rel, max_iter } => conjugate_gradient(&sys.matrix, &neg, rel, max_iter)?.0,
        }
    };
    let res = norm(&residual(&sys.matrix, &x, &sys.rhs));
    if res > tol {
        return Err(IgaError::Residual { residual: res / rn });
    }
    let mut full = sys.dirichlet_values.clone();
    for (g, f) in space.free_index.iter().enumerate() {
        if let Some(f) = *f {
            full[g] = x[f];
        }
    }
    Ok(full)
}

/// Builds the space, assembles, solves, and wraps the result.
pub fn solve_model(
    model: Arc<MultiPatchModel>,
    disc: Discretization,
    voltages: Voltages,
    solver: LinearSolver,
) -> Result<FieldSolution, IgaError> {
    let space = Arc::new(SplineSpace::build(&model, disc)?);
    let sys = assemble(&space, &model, &voltages)?;
    let coeffs = solve(&space, &sys, solver)?;
    Ok(FieldSolution::new(model, space, coeffs, voltages))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{parallel_plate, BoundarySide, DesignMap, Material, Patch, EPS0};
    use crate::spline::{NurbsSurface, Side};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn annulus_element() -> MultiPatchModel {
        let b = |side, tag| BoundarySide { patch: 0, side, tag };
        MultiPatchModel {
            patches: vec![Patch {
                name: "el".into(),
                surface: NurbsSurface::bilinear([1., 0.], [2., 0.], [1., 1.], [2., 1.]),
                material: Material::Vacuum,
            }],
            interfaces: vec![],
            boundaries: vec![
                b(Side::EtaMin, BoundaryTag::GammaD1),
                b(Side::EtaMax, BoundaryTag::GammaD0),
                b(Side::XiMin, BoundaryTag::Natural),
                b(Side::XiMax, BoundaryTag::Natural),
            ],
            eps_vacuum: EPS0,
            eps_insulator: EPS0,
            triple_point: None,
            electrode_loop: vec![],
            design: DesignMap::default(),
        }
    }

    #[test]
    fn bilinear_element_matches_hand_integrals() {
        let m = annulus_element();
        let disc = Discretization {
            degree: 1,
            continuity: 0,
            n_sub: 1,
        };
        let s = SplineSpace::build(&m, disc).unwrap();
        let k = assemble_stiffness(&s, &m).unwrap();
        // ρ = 1 + ξ, z = η; local order (ξ-index) + 2 (η-index)
        // ∫(1+ξ) a_i' a_j' dξ = ±3/2, ∫(1+ξ) a_i a_j dξ = [[5/12, 1/4], [1/4, 7/12]]
        // ∫ b_i b_j dη = [[1/3, 1/6], [1/6, 1/3]], ∫ b_i' b_j' dη = ±1
        let ad = [[1.5, -1.5], [-1.5, 1.5]];
        let am = [[5.0 / 12.0, 0.25], [0.25, 7.0 / 12.0]];
        let bm = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];
        let bd = [[1.0, -1.0], [-1.0, 1.0]];
        for a in 0..4 {
            for b in 0..4 {
                let (ia, ja, ib, jb) = (a % 2, a / 2, b % 2, b / 2);
                let want = EPS0 * (ad[ia][ib] * bm[ja][jb] + am[ia][ib] * bd[ja][jb]);
                let got = k.get(s.patches[0].global[a], s.patches[0].global[b]);
                assert!((got - want).abs() <= 1e-14 * EPS0, "({a},{b}): {got} vs {want}");
            }
        }
    }

    #[test]
    fn constants_in_kernel_and_symmetry() {
        let m = parallel_plate(0.05, 0.08).unwrap();
        let s = SplineSpace::build(
            &m,
            Discretization {
                degree: 3,
                continuity: 2,
                n_sub: 6,
            },
        )
        .unwrap();
        let k = assemble_stiffness(&s, &m).unwrap();
        let ones = vec![1.0; s.n_global];
        let kx = k.mul_vec(&ones);
        let scale = k.max_abs();
        assert!(kx.iter().all(|v| v.abs() <= 1e-10 * scale));
        assert!(k.asymmetry() <= 1e-14 * scale);
    }

    #[test]
    fn reduced_matrix_is_positive_definite() {
        let m = parallel_plate(0.05, 0.08).unwrap();
        let s = SplineSpace::build(&m, Discretization::default()).unwrap();
        let sys = assemble(&s, &m, &Voltages::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let x: Vec<f64> = (0..s.n_free).map(|_| rng.random_range(-1.0..1.0)).collect();
            let kx = sys.matrix.mul_vec(&x);
            let e: f64 = x.iter().zip(&kx).map(|(a, b)| a * b).sum();
            assert!(e > 0.0);
        }
        // the full matrix is only semi-definite
        let x: Vec<f64> = (0..s.n_global).map(|_| rng.random_range(-1.0..1.0)).collect();
        let e: f64 = x.iter().zip(sys.stiffness.mul_vec(&x)).map(|(a, b)| a * b).sum();
        assert!(e >= -1e-12 * sys.stiffness.max_abs());
    }

    #[test]
    fn equal_voltages_give_a_constant() {
        let m = Arc::new(parallel_plate(0.05, 0.08).unwrap());
        let v = Voltages {
            d0: 7.0,
            d1: 7.0,
            d2: 7.0,
        };
        let sol = solve_model(m, Discretization::default(), v, LinearSolver::Direct).unwrap();
        assert!(sol.coefficients().iter().all(|c| (c - 7.0).abs() < 1e-10 * 7.0));
    }

    #[test]
    fn cg_and_direct_agree() {
        let m = Arc::new(parallel_plate(0.05, 0.08).unwrap());
        let d = Discretization {
            degree: 2,
            continuity: 1,
            n_sub: 8,
        };
        let a = solve_model(m.clone(), d, Voltages::default(), LinearSolver::Direct).unwrap();
        let b = solve_model(
            m,
            d,
            Voltages::default(),
            LinearSolver::Cg {
                tol: 1e-13,
                max_iter: 10_000,
            },
        )
        .unwrap();
        for (x, y) in a.coefficients().iter().zip(b.coefficients()) {
            assert!((x - y).abs() <= 1e-7 * 300e3);
        }
    }

    #[test]
    fn serde_of_solver_choice() {
        let s: LinearSolver = serde_json::from_str(r#"{"kind":"cg","tol":1e-12,"max_iter":500}"#).unwrap();
        assert_eq!(
            s,
            LinearSolver::Cg {
                tol: 1e-12,
                max_iter: 500
            }
        );
        let d: LinearSolver = serde_json::from_str(r#"{"kind":"direct"}"#).unwrap();
        assert_eq!(d, LinearSolver::Direct);
    }
}
