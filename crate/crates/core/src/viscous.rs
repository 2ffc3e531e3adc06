//! Vanishing-viscosity regularization: the implicit scheme with total face
//! flux `k_{j+1/2} Δ₊G(u_j) + μ Δ₊u_j` and zero total flux at both ends.
//!
//! With `mu == 0` every routine here takes the exact code path of
//! [`crate::implicit`].

use crate::error::{Error, Result};
use crate::implicit::{run_stencil, Snapshots, StepDiagnostics, Stencil, Trajectory};
use crate::model::{CoefficientField, GridFunction, Nonlinearity, Problem, SolverConfig};
use crate::tridiag::TridiagonalMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct ViscosityConfig {
    pub solver: SolverConfig,
    pub mu: f64,
}

impl ViscosityConfig {
    pub fn new(solver: SolverConfig, mu: f64) -> Result<Self> {
        if !(mu.is_finite() && mu >= 0.0) {
            return Err(Error::invalid("mu", format!("must be finite and >= 0, got {mu}")));
        }
        Ok(ViscosityConfig { solver, mu })
    }
}

fn stencil<'a>(lambda: f64, k: &'a CoefficientField, model: &'a Nonlinearity, mu: f64) -> Result<Stencil<'a>> {
    if !(mu.is_finite() && mu >= 0.0) {
        return Err(Error::invalid("mu", format!("must be finite and >= 0, got {mu}")));
    }
    Ok(Stencil::new(lambda, k, model, mu))
}

pub fn viscous_residual(
    u: &GridFunction,
    prev: &GridFunction,
    lambda: f64,
    k: &CoefficientField,
    model: &Nonlinearity,
    mu: f64,
) -> Result<Vec<f64>> {
    u.same_grid(prev)?;
    if k.cells() != u.len() {
        return Err(Error::ShapeMismatch {
            expected: u.len() + 1,
            found: k.face_values().len(),
        });
    }
    Ok(stencil(lambda, k, model, mu)?.residual(u.values(), prev.values()))
}

pub fn viscous_jacobian(
    u: &GridFunction,
    lambda: f64,
    k: &CoefficientField,
    model: &Nonlinearity,
    mu: f64,
) -> Result<TridiagonalMatrix> {
    if k.cells() != u.len() {
        return Err(Error::ShapeMismatch {
            expected: u.len() + 1,
            found: k.face_values().len(),
        });
    }
    Ok(stencil(lambda, k, model, mu)?.jacobian(u.values()))
}

pub fn viscous_step_solve(
    prev: &GridFunction,
    vcfg: &ViscosityConfig,
    k: &CoefficientField,
    model: &Nonlinearity,
) -> Result<(GridFunction, StepDiagnostics)> {
    stencil(vcfg.solver.lambda, k, model, vcfg.mu)?.solve(prev, &vcfg.solver)
}

pub fn viscous_run(problem: &Problem, vcfg: &ViscosityConfig, t_end: f64, snapshots: &Snapshots) -> Result<Trajectory> {
    let s = stencil(vcfg.solver.lambda, &problem.k, &problem.model, vcfg.mu)?;
    run_stencil(s, &problem.u0, &vcfg.solver, t_end, snapshots, |_, _, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::implicit::{residual, run};
    use crate::model::{project_initial, Grid, TimeStep};
    use std::f64::consts::PI;

    #[test]
    fn zero_viscosity_matches_inviscid_residual() {
        let g = Grid::new(6).unwrap();
        let k = CoefficientField::from_fn(&g, |x| 1.0 + x).unwrap();
        let m = Nonlinearity::clipped_quadratic();
        let u = project_initial(|x| (5.0 * x).sin(), &g).unwrap();
        let p = project_initial(|x| (3.0 * x).cos(), &g).unwrap();
        assert_eq!(
            viscous_residual(&u, &p, 2.0, &k, &m, 0.0).unwrap(),
            residual(&u, &p, 2.0, &k, &m).unwrap()
        );
    }

    #[test]
    fn constant_state_zero_residual() {
        let g = Grid::new(4).unwrap();
        let k = CoefficientField::constant(&g, 2.0).unwrap();
        let u = GridFunction::constant(g, -0.3);
        let f = viscous_residual(&u, &u, 3.0, &k, &Nonlinearity::identity(), 0.7).unwrap();
        assert!(f.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_cell_linear_viscous() {
        // a - 2(b - a) = 0, b + 2(b - a) = 1  =>  a = 2/5, b = 3/5
        let g = Grid::new(1).unwrap();
        let k = CoefficientField::constant(&g, 1.0).unwrap();
        let u = GridFunction::new(g, vec![0.4, 0.6]).unwrap();
        let prev = GridFunction::new(g, vec![0.0, 1.0]).unwrap();
        let f = viscous_residual(&u, &prev, 1.0, &k, &Nonlinearity::identity(), 1.0).unwrap();
        assert!(f.iter().all(|v| v.abs() < 1e-15), "{f:?}");

        let cfg = SolverConfig::new(&g, TimeStep::MeshRatio(1.0)).unwrap();
        let vcfg = ViscosityConfig::new(cfg, 1.0).unwrap();
        let (sol, d) = viscous_step_solve(&prev, &vcfg, &k, &Nonlinearity::identity()).unwrap();
        assert_eq!(d.newton_iters, 1);
        assert!((sol.values()[0] - 0.4).abs() < 1e-15);
        assert!((sol.values()[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn jacobian_gains_viscous_entries() {
        let g = Grid::new(1).unwrap();
        let k = CoefficientField::constant(&g, 1.0).unwrap();
        let u = GridFunction::new(g, vec![-1.0, -1.0]).unwrap();
        let j = viscous_jacobian(&u, 2.0, &k, &Nonlinearity::clipped_quadratic(), 0.5).unwrap();
        assert_eq!(j.diag, vec![2.0, 2.0]);
        assert_eq!(j.sub, vec![-1.0]);
        assert_eq!(j.sup, vec![-1.0]);
    }

    #[test]
    fn negative_viscosity_rejected() {
        let g = Grid::new(1).unwrap();
        let cfg = SolverConfig::new(&g, TimeStep::MeshRatio(1.0)).unwrap();
        assert!(ViscosityConfig::new(cfg, -1.0).is_err());
    }

    #[test]
    fn zero_viscosity_run_is_bitwise_identical() {
        let g = Grid::new(40).unwrap();
        let k = CoefficientField::constant(&g, 1.0).unwrap();
        let u0 = project_initial(|x| 2.0 * (2.0 * PI * x).sin(), &g).unwrap();
        let p = Problem::new(Nonlinearity::clipped_quadratic(), k, u0).unwrap();
        let cfg = SolverConfig::new(&g, TimeStep::PerDx(0.01)).unwrap();
        let a = run(&p, &cfg, 0.01, &Snapshots::EveryStep).unwrap();
        let vcfg = ViscosityConfig::new(cfg, 0.0).unwrap();
        let b = viscous_run(&p, &vcfg, 0.01, &Snapshots::EveryStep).unwrap();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.states.iter().zip(&b.states) {
            let xb: Vec<u64> = x.values().iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u64> = y.values().iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
    }

    #[test]
    fn large_viscosity_contracts_toward_mean() {
        let g = Grid::new(31).unwrap();
        let k = CoefficientField::constant(&g, 1.0).unwrap();
        let u0 = project_initial(|x| 2.0 * (2.0 * PI * x).sin() + 0.3, &g).unwrap();
        let mean = u0.values().iter().sum::<f64>() / u0.len() as f64;
        let dev0 = u0.values().iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
        let p = Problem::new(Nonlinearity::clipped_quadratic(), k, u0).unwrap();
        let cfg = SolverConfig::new(&g, TimeStep::Fixed(1e-3)).unwrap();
        let vcfg = ViscosityConfig::new(cfg, 10.0).unwrap();
        let t = viscous_run(&p, &vcfg, 0.1, &Snapshots::Times(vec![0.1])).unwrap();
        let dev = t.last().values().iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
        assert!(dev < dev0);
        assert!(dev < 1e-3 * dev0, "{dev}");
    }
}
