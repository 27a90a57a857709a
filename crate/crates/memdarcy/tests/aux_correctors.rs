use memdarcy::aux_correctors::{bogovskii_cell, bogovskii_fields, flux_corrector, flux_potential};
use memdarcy::cell_corrector::{solve_correctors, PermeabilityKernel};
use memdarcy::geometry::{CellGeometry, ObstacleShape};
use memdarcy::mac::{Comp, MacGrid};
use memdarcy::time::TimeGrid;
use std::f64::consts::PI;
use std::sync::Arc;

fn sine_flux_error(n: usize) -> f64 {
    let grid = Arc::new(MacGrid::open(n, n, 1.0 / n as f64, true));
    let time = TimeGrid::uniform(1.0, 1).unwrap();
    let b1: Vec<f64> = (0..grid.nfaces())
        .map(|f| match grid.face_ij(f) {
            (Comp::U, _, _) => (2.0 * PI * grid.face_pos(f)[1]).sin(),
            _ => 0.0,
        })
        .collect();
    let zero = vec![0.0; grid.nfaces()];
    let fc = flux_potential(grid.clone(), time, [vec![b1.clone(), b1], vec![zero.clone(), zero]]).unwrap();
    assert!(fc.residual() < 1e-9, "{:e}", fc.residual());
    let mut err = 0.0f64;
    for l in 0..n {
        for i in 0..n {
            let y = l as f64 / n as f64;
            let c = l * n + i;
            let want = -(2.0 * PI * y).cos() / (2.0 * PI);
            err = err.max((fc.entry(1, 0, 0, 0, c) - want).abs());
            err = err.max((fc.entry(0, 1, 0, 0, c) + want).abs());
            assert_eq!(fc.entry(1, 0, 1, 0, c), 0.0);
        }
    }
    err
}

#[test]
fn flux_corrector_matches_fourier_oracle() {
    let e32 = sine_flux_error(32);
    let e64 = sine_flux_error(64);
    assert!(e64 < 2e-4, "{e64:e}");
    assert!(e32 / e64 > 3.5, "{e32:e} {e64:e}");
}

#[test]
fn torus_bogovskii_matches_fourier_oracle() {
    let n = 64;
    let grid = Arc::new(MacGrid::open(n, n, 1.0 / n as f64, true));
    let g: Vec<f64> = (0..grid.ncells()).map(|c| (2.0 * PI * grid.cell_pos(c)[0]).sin()).collect();
    let v = &bogovskii_fields(&grid, &[g], 1e-10).unwrap()[0];
    let mut err = 0.0f64;
    for f in 0..grid.nfaces() {
        let [x, _] = grid.face_pos(f);
        let want = match grid.face_ij(f).0 {
            Comp::U => -(2.0 * PI * x).cos() / (2.0 * PI),
            Comp::V => 0.0,
        };
        err = err.max((v[f] - want).abs());
    }
    assert!(err < 2e-4, "{err:e}");
}

#[test]
fn trivial_cell_has_vanishing_correctors() {
    let cell = CellGeometry::<f64>::new(ObstacleShape::Square, 0.0, 8).unwrap();
    let time = TimeGrid::graded(1.0, 6, 2.0).unwrap();
    let traj = solve_correctors(&cell, &time).unwrap();
    let kernel = PermeabilityKernel::from_trajectories(&traj).unwrap();
    let fc = flux_corrector(&traj, &kernel).unwrap();
    let bc = bogovskii_cell(&traj, &kernel).unwrap();
    assert!(fc.max_abs() < 1e-8);
    assert!(bc.max_abs() < 1e-8);
}

#[test]
fn default_cell_correctors_satisfy_their_equations() {
    let cell = CellGeometry::<f64>::new(ObstacleShape::Square, 0.25, 16).unwrap();
    let tv: Vec<[[f64; 2]; 2]> = [16, 32]
        .into_iter()
        .map(|m| {
            let time = TimeGrid::uniform(1.0, m).unwrap();
            let traj = solve_correctors(&cell, &time).unwrap();
            let kernel = PermeabilityKernel::from_trajectories(&traj).unwrap();
            let fc = flux_corrector(&traj, &kernel).unwrap();
            let (mean, div) = fc.flux_properties();
            assert!(mean < 1e-12 && div < 1e-10, "{mean:e} {div:e}");
            let bmax = fc.b.iter().flatten().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(fc.residual() <= 1e-9 * (1.0 + bmax), "{:e}", fc.residual());
            let bc = bogovskii_cell(&traj, &kernel).unwrap();
            assert!(bc.divergence_residuals().iter().all(|&r| r <= 1e-6));
            assert_eq!(bc.boundary_values(), 0.0);
            let g = &bc.grid;
            for k in 0..time.len() {
                for i in 0..2 {
                    for j in 0..2 {
                        let s: f64 = g.fluid_cells().iter().map(|&c| bc.rhs[i][j][k][c]).sum();
                        assert!(s.abs() * g.h * g.h < 1e-12);
                    }
                }
            }
            bc.total_variation()
        })
        .collect();
    for i in 0..2 {
        for j in 0..2 {
            let (a, b) = (tv[0][i][j], tv[1][i][j]);
            assert!(a.is_finite() && b.is_finite());
            assert!(b <= 1.5 * a.max(1e-12) + 1e-12, "{tv:?}");
        }
    }
}
